use serde::{Deserialize, Serialize};

use crate::distributions::{derive_seed, WeightLaw};
use crate::error::{Error, Result};
use crate::kernel::{kernel_diag_sequence, QuadratureRule};
use crate::metrics::{DistanceReport, Metric, MetricStat};
use crate::network::{digest_of, sample_outputs, Activation, NetworkConfig};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 271_828;

/// Samples per width: `M(n) = ceil(base · n / min_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRule {
    pub base: usize,
    pub min_width: usize,
}

impl SampleRule {
    pub fn count(&self, width: usize) -> usize {
        (self.base * width).div_ceil(self.min_width)
    }
}

/// A width sweep of one network family against its Gaussian limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Architecture; its hidden widths are replaced by each scheduled width.
    pub network: NetworkConfig,
    pub widths_schedule: Vec<usize>,
    pub samples: SampleRule,
    pub repetitions: usize,
    pub master_seed: u64,
    pub metrics: Vec<Metric>,
}

impl StudyConfig {
    /// Three hidden sigmoid layers, scalar output, zero biases, Gaussian first
    /// layer and Laplace weights above it; widths 16..=8192, `M(n) = 800 n/16`, R = 6.
    pub fn appendix_a() -> Self {
        Self {
            network: NetworkConfig::equal_width(3, 16, Activation::Sigmoid, WeightLaw::Laplace),
            widths_schedule: (4..=13).map(|e| 1usize << e).collect(),
            samples: SampleRule { base: 800, min_width: 16 },
            repetitions: 6,
            master_seed: DEFAULT_SEED,
            metrics: Metric::ALL.to_vec(),
        }
    }

    /// [`Self::appendix_a`] cut to widths 16..=1024, `M(n) = 200 n/16`, R = 3.
    pub fn appendix_a_desk() -> Self {
        Self {
            widths_schedule: (4..=10).map(|e| 1usize << e).collect(),
            samples: SampleRule { base: 200, min_width: 16 },
            repetitions: 3,
            ..Self::appendix_a()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "appendix-a" => Ok(Self::appendix_a()),
            "appendix-a-desk" => Ok(Self::appendix_a_desk()),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (expected appendix-a or appendix-a-desk)"),
            )),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let study: StudyConfig = serde_json::from_str(s).map_err(|source| Error::Json {
            context: "study config".into(),
            source,
        })?;
        study.validate()?;
        Ok(study)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.network.output_dim() != 1 {
            return Err(Error::config("widths", "convergence studies need a scalar output (n_{L+1} = 1)"));
        }
        if self.widths_schedule.is_empty() {
            return Err(Error::config("widths_schedule", "must not be empty"));
        }
        if self.widths_schedule.windows(2).any(|w| w[0] >= w[1]) || self.widths_schedule[0] == 0 {
            return Err(Error::config("widths_schedule", "must be positive and strictly increasing"));
        }
        if self.samples.min_width == 0 {
            return Err(Error::config("samples", "min_width must be positive"));
        }
        if let Some(&n) = self.widths_schedule.iter().find(|&&n| self.samples.count(n) < 2) {
            return Err(Error::config("samples", format!("M({n}) is below 2")));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.metrics.is_empty() {
            return Err(Error::config("metrics", "must not be empty"));
        }
        Ok(())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("study config serializes")
    }

    pub fn digest(&self) -> String {
        digest_of(&self.canonical_json())
    }

    /// Seed owning the stream family of one `(width, repetition)` cell.
    pub fn cell_seed(&self, width: usize, repetition: usize) -> u64 {
        derive_seed(derive_seed(self.master_seed, width as u64), repetition as u64)
    }

    /// `K⁽ᴸ⁺¹⁾(x, x)`, which does not depend on the hidden widths.
    pub fn limit_variance(&self) -> Result<f64> {
        let net = &self.network;
        Ok(kernel_diag_sequence(net, &net.input_vector(), &QuadratureRule::default())?.limit_variance())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub width: usize,
    pub report: DistanceReport,
    /// Sample variance of the output pooled over all repetitions.
    pub variance: f64,
    /// Standard error of `variance`, from the pooled fourth central moment.
    pub variance_stderr: f64,
}

/// Distances of the finite-width output from `N(0, K⁽ᴸ⁺¹⁾)`, one row per scheduled width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub study: StudyConfig,
    pub limit_variance: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// `(width, mean distance)` points of one metric.
    pub fn series(&self, metric: Metric) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.report.get(metric).map(|s| (r.width, s.value)))
            .collect()
    }
}

/// Runs every `(width, repetition)` cell and aggregates the distances.
///
/// Cell `(n, r)` draws `M(n)` outputs from streams `(cell_seed(n, r), i)`, so
/// the table is a pure function of the study, whatever the thread count.
pub fn run_convergence_study(study: &StudyConfig) -> Result<ConvergenceTable> {
    study.validate()?;
    study.network.activation.warn_if_outside_hypotheses("convergence study");
    let limit_variance = study.limit_variance()?;
    let mut rows = Vec::with_capacity(study.widths_schedule.len());
    for &width in &study.widths_schedule {
        let network = study.network.with_hidden_width(width);
        let input = network.input_vector();
        let count = study.samples.count(width);
        let mut per_metric: Vec<Vec<f64>> = vec![Vec::with_capacity(study.repetitions); study.metrics.len()];
        let mut pooled = Vec::with_capacity(count * study.repetitions);
        for rep in 0..study.repetitions {
            let batch = sample_outputs(&network, &input, count, &[0], study.cell_seed(width, rep))?;
            pooled.extend_from_slice(&batch.values);
            for (values, metric) in per_metric.iter_mut().zip(&study.metrics) {
                values.push(metric.against_gaussian(&batch.values, limit_variance)?);
            }
            log::debug!("width {width} repetition {rep} done");
        }
        let metrics = study
            .metrics
            .iter()
            .zip(&per_metric)
            .map(|(&m, values)| (m, MetricStat::from_values(values)))
            .collect();
        log::info!("width {width}: {count} samples x {} repetitions", study.repetitions);
        let (variance, variance_stderr) = pooled_variance(&pooled);
        rows.push(ConvergenceRow {
            width,
            variance,
            variance_stderr,
            report: DistanceReport {
                metrics,
                sample_count: count,
                repetitions: study.repetitions,
            },
        });
    }
    Ok(ConvergenceTable {
        study: study.clone(),
        limit_variance,
        rows,
    })
}

fn pooled_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 / (n - 1.0);
    (var, ((m4 - var * var).max(0.0) / n).sqrt())
}
