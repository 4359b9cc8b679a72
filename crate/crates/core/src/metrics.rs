//! One-dimensional probability distances and the conditional-Gaussian W2 bound.
//!
//! Comparisons against a Gaussian use deterministic plotting positions: the
//! reference sample of size n is `√variance · Φ⁻¹((i − 0.5)/n)`, `i = 1..=n`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Activation;
pub use crate::normal::{cdf as normal_cdf, quantile as normal_quantile};

/// Distances reported by the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Kolmogorov,
    W1,
    W2,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Kolmogorov, Metric::W1, Metric::W2];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Kolmogorov => "kolmogorov",
            Metric::W1 => "w1",
            Metric::W2 => "w2",
        }
    }

    /// Distance between `samples` and `N(0, variance)`.
    pub fn against_gaussian(self, samples: &[f64], variance: f64) -> Result<f64> {
        match self {
            Metric::Kolmogorov => kolmogorov_distance(samples, variance),
            Metric::W1 => wasserstein_p_vs_gaussian(samples, variance, 1),
            Metric::W2 => wasserstein_p_vs_gaussian(samples, variance, 2),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("metric", format!("unknown metric `{s}` (expected kolmogorov, w1 or w2)")))
    }
}

/// Mean and spread of one metric across repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub value: f64,
    pub std: f64,
}

impl MetricStat {
    /// Sample mean and (n − 1)-normalized standard deviation; `std = 0` for one value.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let value = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { value, std }
    }
}

/// Distances of one width's samples from the limit law, aggregated over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub metrics: BTreeMap<Metric, MetricStat>,
    pub sample_count: usize,
    pub repetitions: usize,
}

impl DistanceReport {
    pub fn get(&self, metric: Metric) -> Option<MetricStat> {
        self.metrics.get(&metric).copied()
    }
}

fn check_variance(variance: f64) -> Result<()> {
    if variance.is_finite() && variance > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("variance must be positive, got {variance}")))
    }
}

fn sorted_copy(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("samples contain NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |F_n(x) − Φ(x/√variance)|`, evaluated at both one-sided limits of
/// the empirical CDF at every order statistic.
pub fn kolmogorov_distance(samples: &[f64], limit_variance: f64) -> Result<f64> {
    check_variance(limit_variance)?;
    if samples.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: samples.len() });
    }
    let sorted = sorted_copy(samples)?;
    let n = sorted.len() as f64;
    let scale = limit_variance.sqrt();
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x / scale);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(d.min(1.0))
}

fn check_order(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Wasserstein order must be 1 or 2, got {p}")))
    }
}

fn coupled_wp(a: &[f64], b: &[f64], p: u32) -> f64 {
    let n = a.len() as f64;
    match p {
        1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n,
        _ => (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt(),
    }
}

/// Exact `W_p` between two empirical measures of equal size, via the sorted coupling.
pub fn wasserstein_p_empirical(a: &[f64], b: &[f64], p: u32) -> Result<f64> {
    check_order(p)?;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "Wasserstein sample sizes",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(coupled_wp(&sorted_copy(a)?, &sorted_copy(b)?, p))
}

/// `√variance · Φ⁻¹((i − 0.5)/n)` for `i = 1..=n`.
pub fn gaussian_plotting_positions(n: usize, variance: f64) -> Vec<f64> {
    let s = variance.sqrt();
    (0..n)
        .map(|i| s * normal_quantile((i as f64 + 0.5) / n as f64))
        .collect()
}

/// `W_p` between the empirical measure of `samples` and the plotting-position
/// discretization of `N(0, variance)`.
pub fn wasserstein_p_vs_gaussian(samples: &[f64], variance: f64, p: u32) -> Result<f64> {
    check_order(p)?;
    check_variance(variance)?;
    if samples.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: samples.len() });
    }
    let sorted = sorted_copy(samples)?;
    let q = gaussian_plotting_positions(sorted.len(), variance);
    Ok(coupled_wp(&sorted, &q, p))
}

/// Conditional covariance `v · I_dim` of a Gaussian output layer given `z⁽ᴸ⁾`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCovariance {
    pub v: f64,
    pub dim: usize,
}

impl ConditionalCovariance {
    pub fn with_dim(self, dim: usize) -> Self {
        Self { dim, ..self }
    }
}

/// `v = (C_W / n_L) Σ σ(z_i)²`. Recorded with `dim = 1`; use [`ConditionalCovariance::with_dim`].
pub fn conditional_variance(z_l: &[f64], c_w: f64, activation: Activation) -> ConditionalCovariance {
    let v = if z_l.is_empty() {
        0.0
    } else {
        c_w / z_l.len() as f64 * z_l.iter().map(|&z| activation.apply(z).powi(2)).sum::<f64>()
    };
    ConditionalCovariance { v, dim: 1 }
}

/// Monte Carlo estimate of `E‖A − K‖_HS^p` for `A = v·I`, `K = k·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsMomentEstimate {
    pub p: u32,
    pub value: f64,
    pub standard_error: f64,
}

/// Mean of `(√dim · |vᵢ − k|)^p` with its standard error.
pub fn estimate_hs_moments(v_samples: &[f64], dim: usize, k_limit: f64, p: u32) -> Result<HsMomentEstimate> {
    if p != 2 && p != 4 {
        return Err(Error::InvalidArgument(format!("moment order must be 2 or 4, got {p}")));
    }
    if v_samples.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: v_samples.len() });
    }
    let root_dim = (dim as f64).sqrt();
    let terms: Vec<f64> = v_samples
        .iter()
        .map(|&v| (root_dim * (v - k_limit).abs()).powi(p as i32))
        .collect();
    let stat = MetricStat::from_values(&terms);
    Ok(HsMomentEstimate {
        p,
        value: stat.value,
        standard_error: stat.std / (terms.len() as f64).sqrt(),
    })
}

/// W2 bound between `√A N` and `√K N` for `K = k·I_dim`:
///
/// ```text
/// (1/√λ) (E‖A−K‖²_HS)^{1/2} + 2^{3/2} d^{1/4} λ^{-3/2} (E‖A−K‖⁴_HS)^{1/2},   λ = k
/// ```
pub fn entropic_w2_bound(k_limit: f64, dim: usize, m2: &HsMomentEstimate, m4: &HsMomentEstimate) -> Result<f64> {
    if !(k_limit.is_finite() && k_limit > 0.0) {
        return Err(Error::DegenerateKernel { layer: 0, value: k_limit });
    }
    if m2.p != 2 || m4.p != 4 {
        return Err(Error::InvalidArgument("expected second and fourth HS moments".into()));
    }
    if m2.value < 0.0 || m4.value < 0.0 {
        return Err(Error::InvalidArgument("HS moments must be nonnegative".into()));
    }
    let first = m2.value.sqrt() / k_limit.sqrt();
    let second = 2f64.powf(1.5) * (dim as f64).powf(0.25) * k_limit.powf(-1.5) * m4.value.sqrt();
    Ok(first + second)
}
