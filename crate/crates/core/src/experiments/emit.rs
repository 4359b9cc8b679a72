//! Result files. Floats are written with Rust's shortest round-trip
//! formatting, so identical tables give byte-identical files.
//!
//! The convergence CSV carries `#`-prefixed metadata lines (canonical study
//! JSON, its digest, the limit variance) above the header
//! `width,metric,value,std,sample_count,repetitions,seed`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    fit_convergence, ConvergenceRow, ConvergenceTable, LastLayerTable, RateFit, StudyConfig, SwitchDecayTable,
    DEFAULT_MIN_WIDTH,
};
use crate::error::{Error, Result};
use crate::kernel::KernelRecord;
use crate::metrics::Metric;
use crate::network::SampleBatch;

pub const CONVERGENCE_HEADER: &str = "width,metric,value,std,sample_count,repetitions,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::config("format", format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

/// A rate fit tagged with its metric, as stored in the JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFit {
    pub metric: Metric,
    #[serde(flatten)]
    pub fit: RateFit,
}

/// JSON form of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceDocument {
    pub config: StudyConfig,
    pub limit_variance: f64,
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<MetricFit>,
}

impl ConvergenceDocument {
    /// Attaches a fit at [`DEFAULT_MIN_WIDTH`] for every metric that has enough points.
    pub fn new(table: &ConvergenceTable) -> Self {
        let fits = table
            .study
            .metrics
            .iter()
            .filter_map(|&metric| {
                fit_convergence(table, metric, DEFAULT_MIN_WIDTH)
                    .ok()
                    .map(|fit| MetricFit { metric, fit })
            })
            .collect();
        Self {
            config: table.study.clone(),
            limit_variance: table.limit_variance,
            rows: table.rows.clone(),
            fits,
        }
    }

    pub fn into_table(self) -> ConvergenceTable {
        ConvergenceTable {
            study: self.config,
            limit_variance: self.limit_variance,
            rows: self.rows,
        }
    }
}

pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::new();
    writeln!(out, "# config={}", table.study.canonical_json()).unwrap();
    writeln!(out, "# digest={}", table.study.digest()).unwrap();
    writeln!(out, "# limit_variance={}", table.limit_variance).unwrap();
    writeln!(out, "{CONVERGENCE_HEADER}").unwrap();
    for row in &table.rows {
        for (metric, stat) in &row.report.metrics {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.width,
                metric,
                stat.value,
                stat.std,
                row.report.sample_count,
                row.report.repetitions,
                table.study.master_seed
            )
            .unwrap();
        }
    }
    out
}

pub fn convergence_json(table: &ConvergenceTable) -> String {
    let mut s = serde_json::to_string_pretty(&ConvergenceDocument::new(table)).expect("document serializes");
    s.push('\n');
    s
}

pub fn emit_results(table: &ConvergenceTable, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Csv => convergence_csv(table),
        Format::Json => convergence_json(table),
    };
    write_file(path, &body)
}

pub fn switch_csv(table: &SwitchDecayTable) -> String {
    let mut out = String::new();
    writeln!(out, "# config_digest={}", table.config_digest).unwrap();
    writeln!(out, "# seed={}", table.master_seed).unwrap();
    writeln!(out, "# coupling={}", serde_json::to_value(table.coupling).unwrap().as_str().unwrap()).unwrap();
    writeln!(out, "k,width,delta,mean_difference,stderr,samples").unwrap();
    for r in &table.rows {
        writeln!(out, "{},{},{},{},{},{}", r.k, r.width, r.delta, r.mean_difference, r.stderr, r.samples).unwrap();
    }
    out
}

pub fn last_layer_csv(table: &LastLayerTable) -> String {
    let mut out = String::new();
    writeln!(out, "# config_digest={}", table.config_digest).unwrap();
    writeln!(out, "# seed={}", table.master_seed).unwrap();
    writeln!(out, "width,w2,null_w2,sample_count").unwrap();
    for r in &table.rows {
        writeln!(out, "{},{},{},{}", r.width, r.w2, r.null_w2, r.sample_count).unwrap();
    }
    out
}

/// Raw realizations, one row each, for histogram overlays.
pub fn samples_csv(batch: &SampleBatch, limit_variance: f64) -> String {
    let mut out = String::new();
    writeln!(out, "# config_digest={}", batch.config_digest).unwrap();
    writeln!(out, "# seed={}", batch.master_seed).unwrap();
    writeln!(out, "# limit_variance={limit_variance}").unwrap();
    out.push_str("realization");
    for j in 1..=batch.dim {
        write!(out, ",value_{j}").unwrap();
    }
    out.push('\n');
    for i in 0..batch.count() {
        write!(out, "{i}").unwrap();
        for v in batch.row(i) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn kernel_csv(records: &[KernelRecord]) -> String {
    let mut out = String::from("layer,k_xx,k_xy,k_yy\n");
    for r in records {
        writeln!(out, "{},{},{},{}", r.layer, r.k_xx, r.k_xy, r.k_yy).unwrap();
    }
    out
}

pub fn write_file(path: &Path, body: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

/// One data line of a convergence CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCsvRow {
    pub width: usize,
    pub metric: Metric,
    pub value: f64,
    pub std: f64,
    pub sample_count: usize,
    pub repetitions: usize,
    pub seed: u64,
}

pub fn parse_convergence_csv(text: &str, context: &str) -> Result<Vec<ConvergenceCsvRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv { context: context.into(), message: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != CONVERGENCE_HEADER {
        return Err(Error::Csv {
            context: context.into(),
            message: format!("expected header `{CONVERGENCE_HEADER}`, found `{headers}`"),
        });
    }
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Csv {
                context: context.into(),
                message: format!("data row {}: {e}", i + 1),
            })
        })
        .collect()
}

/// `(width, value)` points of one metric from convergence CSV rows.
pub fn csv_series(rows: &[ConvergenceCsvRow], metric: Metric) -> Vec<(usize, f64)> {
    rows.iter().filter(|r| r.metric == metric).map(|r| (r.width, r.value)).collect()
}
