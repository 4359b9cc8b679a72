//! Forward evaluation of random fully connected networks.
//!
//! ```text
//! z⁽¹⁾ = W⁽¹⁾ x + b⁽¹⁾
//! z⁽ℓ⁾ = W⁽ℓ⁾ σ(z⁽ℓ⁻¹⁾) + b⁽ℓ⁾,   ℓ = 2, …, L+1
//! ```
//!
//! Weights and biases are drawn afresh on every call. Layer ℓ reads its
//! weights from sub-stream `2ℓ` and its biases from sub-stream `2ℓ + 1` of the
//! realization's stream, so two networks evaluated on the same stream share
//! every layer they have in common.

mod activation;
mod config;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use activation::{Activation, Smoothness};
pub use config::{InputSpec, NetworkConfig, DEFAULT_INPUT_DIM};
pub(crate) use config::digest_of;

use crate::distributions::{sample_bias, streamed_matvec, RandomStream, WeightLaw};
use crate::error::{Error, Result};

/// Pre-activations `z⁽¹⁾, …, z⁽ᴸ⁺¹⁾` of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutputs {
    layers: Vec<Vec<f64>>,
}

impl LayerOutputs {
    /// `z⁽ℓ⁾` for `layer ∈ 1..=L+1`.
    pub fn layer(&self, layer: usize) -> &[f64] {
        &self.layers[layer - 1]
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("at least one layer")
    }

    pub fn into_layers(self) -> Vec<Vec<f64>> {
        self.layers
    }
}

pub(crate) fn weight_stream(stream: RandomStream, layer: usize) -> RandomStream {
    stream.substream(2 * layer as u64)
}

pub(crate) fn bias_stream(stream: RandomStream, layer: usize) -> RandomStream {
    stream.substream(2 * layer as u64 + 1)
}

/// Input seen by the weights of `layer`: `x` for layer 1, `σ(z⁽ℓ⁻¹⁾)` otherwise.
pub(crate) fn layer_input(config: &NetworkConfig, layer: usize, previous: &[f64]) -> Vec<f64> {
    if layer == 1 {
        previous.to_vec()
    } else {
        previous.iter().map(|&z| config.activation.apply(z)).collect()
    }
}

pub(crate) fn add_bias(config: &NetworkConfig, layer: usize, stream: RandomStream, z: &mut [f64]) {
    if config.c_b > 0.0 {
        let b = sample_bias(z.len(), config.c_b, bias_stream(stream, layer))
            .expect("validated bias variance");
        for (zi, bi) in z.iter_mut().zip(b) {
            *zi += bi;
        }
    }
}

/// One layer with weights from `law`, drawn from the realization's stream.
pub(crate) fn layer_forward(
    config: &NetworkConfig,
    layer: usize,
    law: WeightLaw,
    input: &[f64],
    stream: RandomStream,
) -> Vec<f64> {
    let mut z = vec![0.0; config.widths[layer]];
    streamed_matvec(
        law,
        config.weight_variance(layer),
        weight_stream(stream, layer),
        input,
        &mut z,
    );
    add_bias(config, layer, stream, &mut z);
    z
}

/// Runs layers `from..=to`, starting from the pre-activation (or the input
/// when `from == 1`) in `previous`, using each layer's configured law.
pub(crate) fn propagate(
    config: &NetworkConfig,
    from: usize,
    to: usize,
    previous: Vec<f64>,
    stream: RandomStream,
) -> Vec<f64> {
    (from..=to).fold(previous, |prev, layer| {
        let input = layer_input(config, layer, &prev);
        layer_forward(config, layer, config.layer_law(layer), &input, stream)
    })
}

fn check_input(config: &NetworkConfig, input: &[f64]) -> Result<()> {
    config.validate()?;
    if input.len() != config.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "network input",
            expected: config.input_dim(),
            actual: input.len(),
        });
    }
    Ok(())
}

/// One realization of every layer of the network.
pub fn forward(config: &NetworkConfig, input: &[f64], stream: RandomStream) -> Result<LayerOutputs> {
    check_input(config, input)?;
    let mut layers = Vec::with_capacity(config.depth + 1);
    let mut prev = input.to_vec();
    for layer in 1..=config.depth + 1 {
        let act = layer_input(config, layer, &prev);
        let z = layer_forward(config, layer, config.layer_law(layer), &act, stream);
        prev = z.clone();
        layers.push(z);
    }
    Ok(LayerOutputs { layers })
}

pub(crate) fn check_projection(indices: &[usize], dim: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("projection must select at least one coordinate".into()));
    }
    let mut seen = vec![false; dim];
    for &i in indices {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    Ok(())
}

/// Output coordinates `indices` (0-based, distinct) of one realization.
pub fn forward_projected(
    config: &NetworkConfig,
    input: &[f64],
    indices: &[usize],
    stream: RandomStream,
) -> Result<Vec<f64>> {
    check_input(config, input)?;
    check_projection(indices, config.output_dim())?;
    let out = propagate(config, 1, config.depth + 1, input.to_vec(), stream);
    Ok(indices.iter().map(|&i| out[i]).collect())
}

/// Independent realizations of a projected network output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub config_digest: String,
    pub input: Vec<f64>,
    pub dim: usize,
    pub master_seed: u64,
    /// Row-major `count × dim` values.
    pub values: Vec<f64>,
}

impl SampleBatch {
    pub fn count(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.dim).copied().collect()
    }
}

/// `count` independent realizations; realization `i` uses stream
/// `(master_seed, i)`. The result does not depend on the rayon pool size.
pub fn sample_outputs(
    config: &NetworkConfig,
    input: &[f64],
    count: usize,
    indices: &[usize],
    master_seed: u64,
) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::ZeroDimension("sample count"));
    }
    check_input(config, input)?;
    check_projection(indices, config.output_dim())?;
    let rows: Vec<Vec<f64>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let out = propagate(config, 1, config.depth + 1, input.to_vec(), RandomStream::new(master_seed, i));
            indices.iter().map(|&j| out[j]).collect()
        })
        .collect();
    Ok(SampleBatch {
        config_digest: config.digest(),
        input: input.to_vec(),
        dim: indices.len(),
        master_seed,
        values: rows.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_matrix;

    fn cfg(activation: Activation, law: WeightLaw) -> NetworkConfig {
        NetworkConfig::equal_width(3, 6, activation, law)
    }

    #[test]
    fn layer_lengths_match_widths() {
        let mut c = cfg(Activation::Tanh, WeightLaw::Uniform);
        c.widths = vec![4, 5, 7, 3, 2];
        c.c_b = 0.3;
        let out = forward(&c, &c.input_vector(), RandomStream::new(1, 0)).unwrap();
        assert_eq!(out.depth(), 3);
        for l in 1..=4 {
            assert_eq!(out.layer(l).len(), c.widths[l]);
        }
    }

    #[test]
    fn first_layer_is_explicit_product() {
        let mut c = cfg(Activation::Tanh, WeightLaw::Laplace);
        c.c_b = 0.5;
        let x = [0.3, -1.0, 2.0, 0.25];
        let s = RandomStream::new(4, 2);
        let out = forward(&c, &x, s).unwrap();
        let w = sample_matrix(WeightLaw::Gaussian, 6, 4, c.c_w / 4.0, weight_stream(s, 1)).unwrap();
        let b = sample_bias(6, 0.5, bias_stream(s, 1)).unwrap();
        let expect: Vec<f64> = w.mul_vec(&x).iter().zip(&b).map(|(a, b)| a + b).collect();
        assert_eq!(out.layer(1), expect.as_slice());

        let act: Vec<f64> = out.layer(1).iter().map(|z| z.tanh()).collect();
        let w2 = sample_matrix(WeightLaw::Laplace, 6, 6, c.c_w / 6.0, weight_stream(s, 2)).unwrap();
        let b2 = sample_bias(6, 0.5, bias_stream(s, 2)).unwrap();
        let expect2: Vec<f64> = w2.mul_vec(&act).iter().zip(&b2).map(|(a, b)| a + b).collect();
        assert_eq!(out.layer(2), expect2.as_slice());
    }

    #[test]
    fn constant_zero_kills_propagation() {
        let c = cfg(Activation::ConstantZero, WeightLaw::Laplace);
        let out = forward(&c, &c.input_vector(), RandomStream::new(2, 2)).unwrap();
        assert!(out.layer(1).iter().any(|&z| z != 0.0));
        for l in 2..=4 {
            assert!(out.layer(l).iter().all(|&z| z == 0.0));
        }
    }

    #[test]
    fn identity_second_moments() {
        // E[z_i^(ℓ)²] = C_W^ℓ for |x|² = n_0 and zero biases.
        let mut c = NetworkConfig::equal_width(3, 5, Activation::Identity, WeightLaw::Rademacher);
        c.c_w = 1.3;
        let n = 40_000;
        let batch = sample_outputs(&c, &c.input_vector(), n, &[0], 17).unwrap();
        let sq: Vec<f64> = batch.values.iter().map(|z| z * z).collect();
        let mean = sq.iter().sum::<f64>() / n as f64;
        let sd = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let expect = 1.3f64.powi(4);
        assert!((mean - expect).abs() < 4.0 * sd / (n as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn full_switch_equals_gaussian_network() {
        let laplace = cfg(Activation::Sigmoid, WeightLaw::Laplace).with_switch(Some(2));
        let gauss = cfg(Activation::Sigmoid, WeightLaw::Gaussian);
        let s = RandomStream::new(5, 5);
        let x = laplace.input_vector();
        assert_eq!(forward(&laplace, &x, s).unwrap(), forward(&gauss, &x, s).unwrap());
    }

    #[test]
    fn projection_contract() {
        let mut c = cfg(Activation::Erf, WeightLaw::Uniform);
        c.widths[4] = 3;
        let x = c.input_vector();
        let s = RandomStream::new(6, 1);
        let full = forward(&c, &x, s).unwrap();
        assert_eq!(forward_projected(&c, &x, &[0, 1, 2], s).unwrap(), full.output());
        assert_eq!(forward_projected(&c, &x, &[2, 0], s).unwrap(), vec![full.output()[2], full.output()[0]]);
        assert!(matches!(forward_projected(&c, &x, &[1, 1], s), Err(Error::DuplicateIndex(1))));
        assert!(matches!(forward_projected(&c, &x, &[3], s), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(
            forward_projected(&c, &[1.0], &[0], s),
            Err(Error::DimensionMismatch { .. })
        ));

        let scalar = cfg(Activation::Erf, WeightLaw::Uniform);
        let one = forward(&scalar, &x, s).unwrap();
        assert_eq!(forward_projected(&scalar, &x, &[0], s).unwrap(), one.output());
    }

    #[test]
    fn sample_outputs_contract() {
        let c = cfg(Activation::Sigmoid, WeightLaw::Laplace);
        let x = c.input_vector();
        let one = sample_outputs(&c, &x, 1, &[0], 3).unwrap();
        assert_eq!(one.count(), 1);
        assert_eq!(one.row(0), forward_projected(&c, &x, &[0], RandomStream::new(3, 0)).unwrap());
        assert_eq!(sample_outputs(&c, &x, 50, &[0], 3).unwrap(), sample_outputs(&c, &x, 50, &[0], 3).unwrap());
        assert!(sample_outputs(&c, &x, 0, &[0], 3).is_err());
    }

    #[test]
    fn thread_count_does_not_change_batches() {
        let c = cfg(Activation::Tanh, WeightLaw::Laplace);
        let x = c.input_vector();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_outputs(&c, &x, 200, &[0], 9).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn switched_top_layer_is_conditionally_gaussian() {
        // Fix z^(L) from one realization, redraw only the Gaussian top layer:
        // each output coordinate should be N(0, v), v = (C_W/n_L) Σ σ(z_i)².
        let mut c = NetworkConfig::equal_width(2, 40, Activation::Sigmoid, WeightLaw::Laplace);
        c.widths[3] = 3;
        c.c_w = 1.5;
        let c = c.with_switch(Some(0));
        let top = c.depth + 1;
        let z_l = propagate(&c, 1, c.depth, c.input_vector(), RandomStream::new(5, 0));
        let v = crate::metrics::conditional_variance(&z_l, c.c_w, c.activation).v;
        let act = layer_input(&c, top, &z_l);
        let n = 20_000;
        let outs: Vec<Vec<f64>> = (0..n)
            .map(|i| layer_forward(&c, top, c.layer_law(top), &act, RandomStream::new(6, i)))
            .collect();
        for j in 0..3 {
            let col: Vec<f64> = outs.iter().map(|o| o[j]).collect();
            let d = crate::metrics::kolmogorov_distance(&col, v).unwrap();
            assert!(d < 1.63 / (n as f64).sqrt(), "coordinate {j}: {d}");
        }
    }
}
