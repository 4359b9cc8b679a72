//! Layer-by-layer switching diagnostics.
//!
//! For `K ∈ {-1, …, L-2}` the networks `z^(L+1; L-K)` and `z^(L+1; L-K-1)`
//! differ only in layer `s = L-K`: the first keeps the original law there, the
//! second uses Gaussian weights. Layers above `s` are Gaussian in both, layers
//! below `s` use the original law in both.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{coupled_matvec, derive_seed, RandomStream};
use crate::error::{Error, Result};
use crate::metrics::MetricStat;
use crate::network::{add_bias, layer_input, propagate, weight_stream, NetworkConfig};

/// Bounded smooth test function of one output coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Tanh { coordinate: usize },
    Cos { coordinate: usize },
    Constant { value: f64 },
}

impl Observable {
    pub fn eval(&self, output: &[f64]) -> f64 {
        match *self {
            Observable::Tanh { coordinate } => output[coordinate].tanh(),
            Observable::Cos { coordinate } => output[coordinate].cos(),
            Observable::Constant { value } => value,
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match *self {
            Observable::Tanh { coordinate } | Observable::Cos { coordinate } if coordinate >= dim => {
                Err(Error::IndexOutOfRange { index: coordinate, dim })
            }
            _ => Ok(()),
        }
    }
}

/// How the two networks of a pair share randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Common random numbers: every layer except `s` is shared, and the two
    /// versions of layer `s` are inverse-CDF transforms of the same uniforms.
    Paired,
    /// The two networks are drawn independently.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchDecayRow {
    pub k: i64,
    /// `n_{L-K-1}`, the fan-in of the switched layer.
    pub width: usize,
    /// `|E F(z^(L+1;L-K)) − E F(z^(L+1;L-K-1))|` estimate.
    pub delta: f64,
    /// Signed mean difference behind `delta`.
    pub mean_difference: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchDecayTable {
    pub config_digest: String,
    pub master_seed: u64,
    pub coupling: Coupling,
    pub rows: Vec<SwitchDecayRow>,
}

impl SwitchDecayTable {
    pub fn row(&self, k: i64) -> Option<&SwitchDecayRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// `(width, delta)` points of one switch index, across concatenated tables.
    pub fn series(&self, k: i64) -> Vec<(usize, f64)> {
        self.rows.iter().filter(|r| r.k == k).map(|r| (r.width, r.delta)).collect()
    }
}

/// [`run_switch_ablation_with`] using [`Coupling::Paired`].
pub fn run_switch_ablation(
    config: &NetworkConfig,
    input: &[f64],
    k_list: &[i64],
    observable: Observable,
    samples: usize,
    master_seed: u64,
) -> Result<SwitchDecayTable> {
    run_switch_ablation_with(config, input, k_list, observable, samples, master_seed, Coupling::Paired)
}

pub fn run_switch_ablation_with(
    config: &NetworkConfig,
    input: &[f64],
    k_list: &[i64],
    observable: Observable,
    samples: usize,
    master_seed: u64,
    coupling: Coupling,
) -> Result<SwitchDecayTable> {
    let base = config.with_switch(None);
    base.validate()?;
    if input.len() != base.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "network input",
            expected: base.input_dim(),
            actual: input.len(),
        });
    }
    if samples < 2 {
        return Err(Error::InsufficientData { needed: 2, got: samples });
    }
    observable.check(base.output_dim())?;
    base.activation.warn_if_outside_hypotheses("switch ablation");
    let depth = base.depth as i64;

    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        if !(-1..=depth - 2).contains(&k) {
            return Err(Error::config("k_list", format!("switch index {k} outside -1..={}", depth - 2)));
        }
        let switched = (depth - k) as usize;
        let upper = base.with_switch(Some(k));
        let lower = base.with_switch(Some(k + 1));
        let seed = derive_seed(master_seed, (k + 1) as u64);
        let diffs: Vec<(f64, f64)> = (0..samples as u64)
            .into_par_iter()
            .map(|i| match coupling {
                Coupling::Paired => paired_pair(&upper, switched, input, observable, RandomStream::new(seed, i)),
                Coupling::Independent => {
                    let a = propagate(&upper, 1, base.depth + 1, input.to_vec(), RandomStream::new(seed, 2 * i));
                    let b = propagate(&lower, 1, base.depth + 1, input.to_vec(), RandomStream::new(seed, 2 * i + 1));
                    (observable.eval(&a), observable.eval(&b))
                }
            })
            .collect();
        let d: Vec<f64> = diffs.iter().map(|(a, b)| a - b).collect();
        let stat = MetricStat::from_values(&d);
        rows.push(SwitchDecayRow {
            k,
            width: base.widths[switched - 1],
            delta: stat.value.abs(),
            mean_difference: stat.value,
            stderr: stat.std / (samples as f64).sqrt(),
            samples,
        });
    }
    Ok(SwitchDecayTable {
        config_digest: base.digest(),
        master_seed,
        coupling,
        rows,
    })
}

/// `(F(z^(L+1;L-K)), F(z^(L+1;L-K-1)))` on shared randomness. `upper` is the
/// config switched at `K`, whose laws agree with both networks outside layer `switched`.
fn paired_pair(
    upper: &NetworkConfig,
    switched: usize,
    input: &[f64],
    observable: Observable,
    stream: RandomStream,
) -> (f64, f64) {
    let below = propagate(upper, 1, switched - 1, input.to_vec(), stream);
    let act = layer_input(upper, switched, &below);
    let width = upper.widths[switched];
    let (mut z_law, mut z_gauss) = (vec![0.0; width], vec![0.0; width]);
    coupled_matvec(
        upper.hidden_law,
        upper.weight_variance(switched),
        weight_stream(stream, switched),
        &act,
        &mut z_law,
        &mut z_gauss,
    );
    add_bias(upper, switched, stream, &mut z_law);
    add_bias(upper, switched, stream, &mut z_gauss);
    let top = upper.depth + 1;
    let out_law = propagate(upper, switched + 1, top, z_law, stream);
    let out_gauss = propagate(upper, switched + 1, top, z_gauss, stream);
    (observable.eval(&out_law), observable.eval(&out_gauss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::WeightLaw;
    use crate::network::Activation;

    fn cfg(law: WeightLaw) -> NetworkConfig {
        NetworkConfig::equal_width(3, 8, Activation::Sigmoid, law)
    }

    #[test]
    fn gaussian_law_pairs_coincide() {
        let c = cfg(WeightLaw::Gaussian);
        let t = run_switch_ablation(&c, &c.input_vector(), &[-1, 0, 1], Observable::Tanh { coordinate: 0 }, 200, 1)
            .unwrap();
        for r in &t.rows {
            assert_eq!(r.delta, 0.0);
            assert_eq!(r.stderr, 0.0);
        }
        let ind = run_switch_ablation_with(
            &c,
            &c.input_vector(),
            &[-1, 0, 1],
            Observable::Tanh { coordinate: 0 },
            4000,
            1,
            Coupling::Independent,
        )
        .unwrap();
        for r in &ind.rows {
            assert!(r.stderr > 0.0);
            assert!(r.delta <= 3.0 * r.stderr, "K={} {} vs {}", r.k, r.delta, r.stderr);
        }
    }

    #[test]
    fn constant_observable_has_no_difference() {
        let c = cfg(WeightLaw::Laplace);
        let t = run_switch_ablation(&c, &c.input_vector(), &[-1, 0, 1], Observable::Constant { value: 1.0 }, 50, 2)
            .unwrap();
        assert!(t.rows.iter().all(|r| r.delta == 0.0 && r.stderr == 0.0));
    }

    #[test]
    fn widths_and_range() {
        let mut c = cfg(WeightLaw::Laplace);
        c.widths = vec![4, 5, 6, 7, 1];
        let t = run_switch_ablation(&c, &c.input_vector(), &[-1, 0, 1], Observable::Cos { coordinate: 0 }, 10, 3).unwrap();
        // K = -1 switches layer 4 (fan-in n_3), K = 1 switches layer 2 (fan-in n_1).
        let widths: Vec<usize> = t.rows.iter().map(|r| r.width).collect();
        assert_eq!(widths, vec![7, 6, 5]);
        assert!(run_switch_ablation(&c, &c.input_vector(), &[2], Observable::Cos { coordinate: 0 }, 10, 3).is_err());
        assert!(run_switch_ablation(&c, &c.input_vector(), &[-2], Observable::Cos { coordinate: 0 }, 10, 3).is_err());
        assert!(run_switch_ablation(&c, &c.input_vector(), &[0], Observable::Cos { coordinate: 1 }, 10, 3).is_err());
    }

    #[test]
    fn paired_branches_match_switched_networks() {
        // The Gaussian branch of K is the law branch of K + 1 in distribution;
        // here we check the shared layers really are shared: with σ ≡ 0 only the
        // top layer's biases reach the output, so both branches agree exactly.
        let mut c = cfg(WeightLaw::Laplace);
        c.activation = Activation::ConstantZero;
        c.c_b = 0.5;
        let t = run_switch_ablation(&c, &c.input_vector(), &[0, 1], Observable::Tanh { coordinate: 0 }, 20, 4).unwrap();
        assert!(t.rows.iter().all(|r| r.delta == 0.0));
    }

    #[test]
    fn pairing_reduces_standard_error() {
        let c = cfg(WeightLaw::Laplace);
        let obs = Observable::Tanh { coordinate: 0 };
        let paired = run_switch_ablation_with(&c, &c.input_vector(), &[-1, 0, 1], obs, 2000, 5, Coupling::Paired).unwrap();
        let indep =
            run_switch_ablation_with(&c, &c.input_vector(), &[-1, 0, 1], obs, 2000, 5, Coupling::Independent).unwrap();
        for (p, i) in paired.rows.iter().zip(&indep.rows) {
            assert!(p.stderr < i.stderr, "K={}: {} vs {}", p.k, p.stderr, i.stderr);
        }
    }
}
