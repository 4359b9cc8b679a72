//! Monte Carlo checks of finite-width identities and of the estimators.

use nngp_core::distributions::RandomStream;
use nngp_core::metrics::{conditional_variance, estimate_hs_moments, kolmogorov_distance, wasserstein_p_vs_gaussian};
use nngp_core::{
    forward, kernel_diag_sequence, limit_gaussian_sampler, sample_outputs, Activation, NetworkConfig, QuadratureRule,
    WeightLaw,
};

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn standard_normal_draws_pass_distance_checks() {
    let n = 100_000;
    let batch = limit_gaussian_sampler(1.0, 1, n, 99).unwrap();
    let ks = kolmogorov_distance(&batch.values, 1.0).unwrap();
    assert!(ks < 1.63 / (n as f64).sqrt(), "{ks}");
    let w2 = wasserstein_p_vs_gaussian(&batch.values, 1.0, 2).unwrap();
    assert!(w2 < 0.02, "{w2}");
}

#[test]
fn output_coordinates_are_exchangeable() {
    let mut c = NetworkConfig::equal_width(2, 24, Activation::Tanh, WeightLaw::Laplace);
    c.widths[3] = 3;
    c.c_b = 0.2;
    let batch = sample_outputs(&c, &c.input_vector(), 20_000, &[0, 1, 2], 7).unwrap();
    let second: Vec<(f64, f64)> = (0..3)
        .map(|j| mean_and_se(&batch.column(j).iter().map(|x| x * x).collect::<Vec<_>>()))
        .collect();
    for a in 0..3 {
        for b in a + 1..3 {
            let (ma, sa) = second[a];
            let (mb, sb) = second[b];
            assert!((ma - mb).abs() < 4.0 * (sa * sa + sb * sb).sqrt(), "{a} vs {b}: {ma} {mb}");
        }
    }
}

#[test]
fn finite_width_second_moment_identity() {
    // E[(z_1^(l+1))²] = c_b + C_W E[(1/n_l) Σ σ(z_j^(l))²] holds exactly at every width.
    let mut c = NetworkConfig::equal_width(3, 12, Activation::Sigmoid, WeightLaw::Uniform);
    c.c_w = 1.8;
    c.c_b = 0.25;
    let x = c.input_vector();
    let outs: Vec<_> = (0..40_000).map(|i| forward(&c, &x, RandomStream::new(17, i)).unwrap()).collect();
    for layer in 1..=c.depth {
        let diffs: Vec<f64> = outs
            .iter()
            .map(|o| {
                let next = o.layer(layer + 1)[0].powi(2);
                let v = conditional_variance(o.layer(layer), c.c_w, c.activation).v;
                next - (c.c_b + v)
            })
            .collect();
        let (m, se) = mean_and_se(&diffs);
        assert!(m.abs() < 4.0 * se, "layer {layer}: {m} +- {se}");
    }
}

fn last_layer_variances(width: usize, count: u64) -> (Vec<f64>, f64) {
    let c = NetworkConfig::equal_width(3, width, Activation::Sigmoid, WeightLaw::Laplace);
    let x = c.input_vector();
    let k = kernel_diag_sequence(&c, &x, &QuadratureRule::default()).unwrap().limit_variance();
    let vs = (0..count)
        .map(|i| {
            let o = forward(&c, &x, RandomStream::new(width as u64, i)).unwrap();
            conditional_variance(o.layer(c.depth), c.c_w, c.activation).v
        })
        .collect();
    (vs, k)
}

#[test]
fn conditional_variance_concentrates_on_the_kernel() {
    let (vs, k) = last_layer_variances(512, 300);
    let (m, se) = mean_and_se(&vs);
    // The bias of E v is O(1/n); it is far below the spread here.
    assert!((m - k).abs() < 4.0 * se + 1e-3, "{m} +- {se} vs {k}");
}

#[test]
fn hs_second_moment_decays_like_inverse_width() {
    let (small, k) = last_layer_variances(32, 4000);
    let (large, _) = last_layer_variances(128, 4000);
    let m_small = estimate_hs_moments(&small, 1, k, 2).unwrap();
    let m_large = estimate_hs_moments(&large, 1, k, 2).unwrap();
    let ratio = m_large.value / m_small.value;
    let se = ratio
        * ((m_small.standard_error / m_small.value).powi(2) + (m_large.standard_error / m_large.value).powi(2)).sqrt();
    assert!((ratio - 0.25).abs() < 4.0 * se + 0.05, "ratio {ratio} +- {se}");
    let m4 = estimate_hs_moments(&large, 1, k, 4).unwrap();
    assert!(m4.value >= m_large.value.powi(2) - 4.0 * m4.standard_error);
}
