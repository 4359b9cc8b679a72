use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SampleRule;
use crate::distributions::{derive_seed, RandomStream, WeightLaw};
use crate::error::{Error, Result};
use crate::metrics::wasserstein_p_empirical;
use crate::network::{layer_forward, layer_input, propagate, NetworkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastLayerRow {
    /// Width `n_L` of the last hidden layer.
    pub width: usize,
    /// Empirical W2 between `z^(L+1)` and `z^(L+1;L)` built on the same `z^(L)`.
    pub w2: f64,
    /// Empirical W2 between two independent Gaussian last layers on the same
    /// `z^(L)`: the estimator's floor at this sample size.
    pub null_w2: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastLayerTable {
    pub config_digest: String,
    pub master_seed: u64,
    pub rows: Vec<LastLayerRow>,
}

impl LastLayerTable {
    pub fn series(&self) -> Vec<(usize, f64)> {
        self.rows.iter().map(|r| (r.width, r.w2)).collect()
    }
}

/// Compares the original-law output layer with a Gaussian one on a shared
/// `z^(L)`, for each last-hidden width in `widths` (other widths unchanged).
pub fn run_last_layer_check(
    config: &NetworkConfig,
    input: &[f64],
    widths: &[usize],
    samples: SampleRule,
    master_seed: u64,
) -> Result<LastLayerTable> {
    let base = config.with_switch(None);
    base.validate()?;
    if base.output_dim() != 1 {
        return Err(Error::config("widths", "the last-layer check needs a scalar output"));
    }
    if input.len() != base.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "network input",
            expected: base.input_dim(),
            actual: input.len(),
        });
    }
    if widths.is_empty() || widths.contains(&0) {
        return Err(Error::config("last_widths", "must be a nonempty list of positive widths"));
    }
    base.activation.warn_if_outside_hypotheses("last-layer check");
    let depth = base.depth;
    let top = depth + 1;

    let mut rows = Vec::with_capacity(widths.len());
    for &width in widths {
        let mut cfg = base.clone();
        cfg.widths[depth] = width;
        let count = samples.count(width);
        if count < 2 {
            return Err(Error::config("samples", format!("M({width}) is below 2")));
        }
        let seed = derive_seed(master_seed, width as u64);
        let triples: Vec<[f64; 3]> = (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let stream = RandomStream::new(seed, i);
                let z_l = propagate(&cfg, 1, depth, input.to_vec(), stream);
                let act = layer_input(&cfg, top, &z_l);
                let original = layer_forward(&cfg, top, cfg.hidden_law, &act, stream)[0];
                let gauss = layer_forward(&cfg, top, WeightLaw::Gaussian, &act, stream.substream(u64::MAX))[0];
                let null = layer_forward(&cfg, top, WeightLaw::Gaussian, &act, stream.substream(u64::MAX - 1))[0];
                [original, gauss, null]
            })
            .collect();
        let column = |j: usize| triples.iter().map(|t| t[j]).collect::<Vec<f64>>();
        let (original, gauss, null) = (column(0), column(1), column(2));
        rows.push(LastLayerRow {
            width,
            w2: wasserstein_p_empirical(&original, &gauss, 2)?,
            null_w2: wasserstein_p_empirical(&gauss, &null, 2)?,
            sample_count: count,
        });
    }
    Ok(LastLayerTable {
        config_digest: base.digest(),
        master_seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;

    fn rule() -> SampleRule {
        SampleRule { base: 400, min_width: 8 }
    }

    #[test]
    fn zero_activation_gives_zero_distance() {
        let c = NetworkConfig::equal_width(2, 8, Activation::ConstantZero, WeightLaw::Laplace);
        let t = run_last_layer_check(&c, &c.input_vector(), &[8, 16], rule(), 1).unwrap();
        assert!(t.rows.iter().all(|r| r.w2 == 0.0 && r.null_w2 == 0.0));
    }

    #[test]
    fn gaussian_law_is_at_the_noise_floor() {
        let c = NetworkConfig::equal_width(2, 8, Activation::Tanh, WeightLaw::Gaussian);
        let t = run_last_layer_check(&c, &c.input_vector(), &[8, 32], rule(), 2).unwrap();
        for r in &t.rows {
            // Both columns compare two independent Gaussian layers.
            assert!(r.w2 < 3.0 * r.null_w2 && r.null_w2 < 3.0 * r.w2, "{r:?}");
            assert_eq!(r.sample_count, rule().count(r.width));
        }
    }

    #[test]
    fn rejects_vector_output() {
        let mut c = NetworkConfig::equal_width(2, 8, Activation::Tanh, WeightLaw::Laplace);
        c.widths[3] = 2;
        assert!(run_last_layer_check(&c, &c.input_vector(), &[8], rule(), 2).is_err());
    }
}
