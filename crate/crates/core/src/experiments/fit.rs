use serde::{Deserialize, Serialize};

use super::{ConvergenceTable, SwitchDecayTable};
use crate::error::{Error, Result};
use crate::metrics::Metric;

/// Widths below this are left out of rate fits by default; pre-asymptotic
/// effects dominate there.
pub const DEFAULT_MIN_WIDTH: usize = 64;

/// Ordinary least squares fit of `ln d = intercept + slope · ln n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub min_width: usize,
    pub max_width: usize,
    pub points: usize,
}

/// Fits the points with `width ≥ min_width` and a positive value.
pub fn fit_rate(points: &[(usize, f64)], min_width: usize) -> Result<RateFit> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, d)| n >= min_width && n > 0 && d > 0.0 && d.is_finite())
        .map(|&(n, d)| ((n as f64).ln(), d.ln()))
        .collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: used.len() });
    }
    let m = used.len() as f64;
    let mean_x = used.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = used.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = used.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs at least two distinct widths".into()));
    }
    let sxy: f64 = used.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss: f64 = used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (m - 2.0) / sxx).sqrt();
    let widths = points.iter().map(|p| p.0).filter(|&n| n >= min_width);
    Ok(RateFit {
        slope,
        intercept,
        stderr,
        min_width: widths.clone().min().unwrap_or(min_width),
        max_width: widths.max().unwrap_or(min_width),
        points: used.len(),
    })
}

pub fn fit_convergence(table: &ConvergenceTable, metric: Metric, min_width: usize) -> Result<RateFit> {
    fit_rate(&table.series(metric), min_width)
}

/// Decay of `|ΔE F|` at one switch index across the widths present in `table`.
pub fn fit_switch(table: &SwitchDecayTable, k: i64, min_width: usize) -> Result<RateFit> {
    fit_rate(&table.series(k), min_width)
}
