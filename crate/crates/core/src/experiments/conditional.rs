//! A synthetic conditionally Gaussian pair: `F = √A·N`, `G = √k·N` with the
//! random scalar `A = k + ε·R`, `R` Rademacher.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::RandomStream;
use crate::error::{Error, Result};
use crate::metrics::{entropic_w2_bound, estimate_hs_moments, wasserstein_p_empirical, MetricStat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCheck {
    pub k: f64,
    pub eps: f64,
    pub bound: f64,
    /// Mean empirical W2(F, G) over replicates.
    pub w2: f64,
    pub w2_stderr: f64,
    pub samples: usize,
    pub replicates: usize,
}

impl ConditionalCheck {
    pub fn dominated(&self, sigmas: f64) -> bool {
        self.w2 <= self.bound + sigmas * self.w2_stderr
    }
}

/// Draws `replicates` independent sample pairs of size `samples` and compares
/// their empirical W2 with the bound evaluated on the sampled `A`.
pub fn conditional_gaussian_check(
    k: f64,
    eps: f64,
    samples: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<ConditionalCheck> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidArgument(format!("k must be positive, got {k}")));
    }
    if !(eps.is_finite() && eps >= 0.0 && eps < k) {
        return Err(Error::InvalidArgument(format!("eps must lie in [0, k), got {eps}")));
    }
    if samples < 2 || replicates < 2 {
        return Err(Error::InsufficientData { needed: 2, got: samples.min(replicates) });
    }
    let runs: Vec<(f64, f64, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let stream = RandomStream::new(master_seed, r);
            let mut rng_f = stream.substream(0).rng();
            let mut rng_g = stream.substream(1).rng();
            let mut a = Vec::with_capacity(samples);
            let mut f = Vec::with_capacity(samples);
            let mut g = Vec::with_capacity(samples);
            for _ in 0..samples {
                let ai = if rng_f.random::<bool>() { k + eps } else { k - eps };
                let n: f64 = rng_f.sample(StandardNormal);
                a.push(ai);
                f.push(ai.sqrt() * n);
                let n: f64 = rng_g.sample(StandardNormal);
                g.push(k.sqrt() * n);
            }
            let m2 = estimate_hs_moments(&a, 1, k, 2).expect("samples >= 2");
            let m4 = estimate_hs_moments(&a, 1, k, 4).expect("samples >= 2");
            let bound = entropic_w2_bound(k, 1, &m2, &m4).expect("k > 0");
            let w2 = wasserstein_p_empirical(&f, &g, 2).expect("equal sizes");
            (bound, w2, m2.value)
        })
        .collect();
    let w2 = MetricStat::from_values(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    let bound = MetricStat::from_values(&runs.iter().map(|r| r.0).collect::<Vec<_>>()).value;
    Ok(ConditionalCheck {
        k,
        eps,
        bound,
        w2: w2.value,
        w2_stderr: w2.std / (replicates as f64).sqrt(),
        samples,
        replicates,
    })
}
