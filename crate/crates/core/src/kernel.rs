//! Infinite-width covariance recursion.
//!
//! ```text
//! K⁽¹⁾(x, y)   = c_b + (C_W / n_0) x·y
//! K⁽ℓ⁺¹⁾(x, y) = c_b + C_W E[σ(Z(x)) σ(Z(y))],   (Z(x), Z(y)) ~ N(0, K⁽ℓ⁾ on {x, y})
//! ```
//!
//! Expectations are computed with Gauss–Hermite quadrature against the
//! standard Gaussian measure. [`kernel_mc_oracle`] recomputes the diagonal by
//! plain Monte Carlo and exists to validate the quadrature path.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::RandomStream;
use crate::error::{Error, Result};
use crate::network::{digest_of, Activation, NetworkConfig, SampleBatch};

/// Default number of Hermite nodes.
pub const DEFAULT_ORDER: usize = 256;

/// Relative tolerance below which a 2×2 covariance is treated as singular.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Gauss–Hermite rule normalized against the standard Gaussian measure:
/// `E[f(U)] ≈ Σ wᵢ f(uᵢ)` for `U ~ N(0, 1)`, exact for polynomials of degree
/// below `2·order`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Nodes by Sturm-sequence bisection on the Jacobi matrix, polished by
    /// Newton steps on the orthonormal Hermite recurrence.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::ZeroDimension("quadrature order"));
        }
        if order > 1024 {
            return Err(Error::InvalidArgument(format!(
                "quadrature order {order} exceeds the supported maximum of 1024"
            )));
        }
        let n = order;
        let m = n.div_ceil(2);
        let pim4 = std::f64::consts::PI.powf(-0.25);
        // Roots of the physicists' H_n, largest first.
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut z;
        for i in 0..m {
            z = sturm_root(n, n - 1 - i, (2.0 * n as f64 + 1.0).sqrt() + 1.0);
            let mut pp = 0.0;
            // The polynomials grow like exp(z²/2) and overflow past order ~180,
            // so they are carried as `p · exp(log_scale)`.
            let mut log_scale = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                log_scale = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
                    if p1.abs() > 1e150 {
                        p1 *= 1e-150;
                        p2 *= 1e-150;
                        log_scale += 150.0 * std::f64::consts::LN_10;
                    }
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let step = p1 / pp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = (std::f64::consts::LN_2 - 2.0 * pp.abs().ln() - 2.0 * log_scale).exp();
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[m - 1] = 0.0;
        }
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
        let mut weights: Vec<f64> = w.iter().rev().map(|v| v / sqrt_pi).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|v| *v /= total);
        // Enforce exact symmetry of the nodes.
        for i in 0..n / 2 {
            let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            nodes[i] = -a;
            nodes[n - 1 - i] = a;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(U)]`, `U ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&u, &w)| w * f(u)).sum()
    }
}

/// `index`-th smallest root of the physicists' `H_n`, by bisection on the
/// Sturm count of its Jacobi matrix (zero diagonal, off-diagonal `√(k/2)`).
fn sturm_root(n: usize, index: usize, bound: f64) -> f64 {
    let below = |x: f64| {
        let mut count = 0;
        let mut q = -x;
        for k in 0..n {
            if k > 0 {
                q = -x - (k as f64 / 2.0) / q;
            }
            if q == 0.0 {
                q = -f64::EPSILON * bound;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (-bound, bound);
    while hi - lo > 1e-10 * bound {
        let mid = 0.5 * (lo + hi);
        if below(mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::gauss_hermite(DEFAULT_ORDER).expect("default order is valid")
    }
}

/// Limit covariances at every layer `1..=L+1`. Index 0 holds layer 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSequence {
    pub diag: Vec<f64>,
    pub cross: Option<Vec<f64>>,
    pub cross_diag_y: Option<Vec<f64>>,
}

/// One output line of the `kernel` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRecord {
    pub layer: usize,
    pub k_xx: f64,
    pub k_xy: f64,
    pub k_yy: f64,
}

impl KernelSequence {
    /// `K⁽ᴸ⁺¹⁾(x, x)`, the variance of each output coordinate in the limit.
    pub fn limit_variance(&self) -> f64 {
        *self.diag.last().expect("nonempty sequence")
    }

    /// Per-layer records; without a second input the cross terms repeat the diagonal.
    pub fn records(&self) -> Vec<KernelRecord> {
        self.diag
            .iter()
            .enumerate()
            .map(|(i, &k_xx)| KernelRecord {
                layer: i + 1,
                k_xx,
                k_xy: self.cross.as_ref().map_or(k_xx, |c| c[i]),
                k_yy: self.cross_diag_y.as_ref().map_or(k_xx, |c| c[i]),
            })
            .collect()
    }
}

fn check_input(config: &NetworkConfig, input: &[f64], what: &'static str) -> Result<()> {
    config.validate()?;
    if input.len() != config.input_dim() {
        return Err(Error::DimensionMismatch {
            what,
            expected: config.input_dim(),
            actual: input.len(),
        });
    }
    Ok(())
}

fn base_kernel(config: &NetworkConfig, x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    config.c_b + config.c_w * dot / config.input_dim() as f64
}

fn check_positive(activation: Activation, layer: usize, k: f64) -> Result<()> {
    if !activation.is_constant() && k.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::DegenerateKernel { layer, value: k });
    }
    Ok(())
}

/// `c_b + C_W E[σ(√k U)²]`.
fn next_diag(config: &NetworkConfig, rule: &QuadratureRule, k: f64) -> f64 {
    let sigma = config.activation;
    if sigma.is_constant() {
        return config.c_b;
    }
    let s = k.sqrt();
    config.c_b + config.c_w * rule.expect(|u| sigma.apply(s * u).powi(2))
}

/// `K⁽ℓ⁾(x, x)` for `ℓ = 1..=L+1`.
pub fn kernel_diag_sequence(
    config: &NetworkConfig,
    input: &[f64],
    rule: &QuadratureRule,
) -> Result<KernelSequence> {
    check_input(config, input, "kernel input")?;
    let mut diag = Vec::with_capacity(config.depth + 1);
    let mut k = base_kernel(config, input, input);
    diag.push(k);
    for layer in 1..=config.depth {
        check_positive(config.activation, layer, k)?;
        k = next_diag(config, rule, k);
        diag.push(k);
    }
    Ok(KernelSequence {
        diag,
        cross: None,
        cross_diag_y: None,
    })
}

/// `c_b + C_W E[σ(A) σ(B)]` for `(A, B)` centred Gaussian with the given covariance.
fn next_cross(config: &NetworkConfig, rule: &QuadratureRule, kxx: f64, kxy: f64, kyy: f64) -> f64 {
    let sigma = config.activation;
    if sigma.is_constant() {
        return config.c_b;
    }
    let det = kxx * kyy - kxy * kxy;
    let sx = kxx.sqrt();
    if det < DEGENERACY_TOL * kxx * kyy {
        // B = ±√(K_yy/K_xx) A: both coordinates driven by one Gaussian.
        let sy = kyy.sqrt().copysign(kxy);
        return config.c_b + config.c_w * rule.expect(|u| sigma.apply(sx * u) * sigma.apply(sy * u));
    }
    // Square-root factorization: A = √K_xx U₁, B = (K_xy/√K_xx) U₁ + √(det/K_xx) U₂.
    let loading = kxy / sx;
    let resid = (det / kxx).sqrt();
    let nodes = rule.nodes();
    let weights = rule.weights();
    let mut total = 0.0;
    for (&u1, &w1) in nodes.iter().zip(weights) {
        let a = sigma.apply(sx * u1);
        let mean_b = loading * u1;
        let inner: f64 = nodes
            .iter()
            .zip(weights)
            .map(|(&u2, &w2)| w2 * sigma.apply(mean_b + resid * u2))
            .sum();
        total += w1 * a * inner;
    }
    config.c_b + config.c_w * total
}

/// Propagates `(K(x,x), K(x,y), K(y,y))` through every layer.
pub fn kernel_cross_sequence(
    config: &NetworkConfig,
    x: &[f64],
    y: &[f64],
    rule: &QuadratureRule,
) -> Result<KernelSequence> {
    check_input(config, x, "kernel input x")?;
    check_input(config, y, "kernel input y")?;
    let mut kxx = base_kernel(config, x, x);
    let mut kxy = base_kernel(config, x, y);
    let mut kyy = base_kernel(config, y, y);
    let (mut diag, mut cross, mut diag_y) = (vec![kxx], vec![kxy], vec![kyy]);
    for layer in 1..=config.depth {
        check_positive(config.activation, layer, kxx)?;
        check_positive(config.activation, layer, kyy)?;
        let next_xy = next_cross(config, rule, kxx, kxy, kyy);
        kxx = next_diag(config, rule, kxx);
        kyy = next_diag(config, rule, kyy);
        kxy = next_xy;
        diag.push(kxx);
        cross.push(kxy);
        diag_y.push(kyy);
    }
    Ok(KernelSequence {
        diag,
        cross: Some(cross),
        cross_diag_y: Some(diag_y),
    })
}

/// Monte Carlo estimate of the diagonal recursion with per-layer standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
}

const ORACLE_CHUNK: usize = 1 << 16;

#[derive(Clone, Copy)]
struct ChunkStats {
    n: f64,
    mean: f64,
    m2: f64,
    /// Σ f(U)(U² − 1), for the score-function derivative in K.
    score: f64,
}

impl ChunkStats {
    fn merge(self, other: ChunkStats) -> ChunkStats {
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        ChunkStats {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
            score: self.score + other.score,
        }
    }
}

/// Estimates each `E[σ(√K⁽ℓ⁾ U)²]` from `sample_count` Gaussian draws and
/// feeds the estimate into the next layer.
///
/// The standard error of layer ℓ+1 combines the sampling error of the layer's
/// own average with the error inherited from `K⁽ℓ⁾`, propagated through
/// `d/dK E[σ(√K U)²] = E[σ(√K U)² (U² − 1)] / 2K` estimated on the same draws.
pub fn kernel_mc_oracle(
    config: &NetworkConfig,
    input: &[f64],
    sample_count: usize,
    master_seed: u64,
) -> Result<OracleEstimate> {
    check_input(config, input, "kernel input")?;
    if sample_count < 100 {
        return Err(Error::InvalidArgument(format!(
            "oracle needs at least 100 samples, got {sample_count}"
        )));
    }
    let sigma = config.activation;
    let mut k = base_kernel(config, input, input);
    let mut se = 0.0;
    let mut estimate = vec![k];
    let mut stderr = vec![se];
    let chunks = sample_count.div_ceil(ORACLE_CHUNK);
    for layer in 1..=config.depth {
        check_positive(sigma, layer, k)?;
        let s = k.sqrt();
        let layer_stream = RandomStream::new(master_seed, layer as u64);
        let stats = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let len = ORACLE_CHUNK.min(sample_count - c * ORACLE_CHUNK);
                let mut rng = layer_stream.substream(c as u64).rng();
                let mut st = ChunkStats {
                    n: 0.0,
                    mean: 0.0,
                    m2: 0.0,
                    score: 0.0,
                };
                for _ in 0..len {
                    let u: f64 = StandardNormal.sample(&mut rng);
                    let f = sigma.apply(s * u).powi(2);
                    st.n += 1.0;
                    let d = f - st.mean;
                    st.mean += d / st.n;
                    st.m2 += d * (f - st.mean);
                    st.score += f * (u * u - 1.0);
                }
                st
            })
            .collect::<Vec<_>>()
            .into_iter()
            .reduce(ChunkStats::merge)
            .expect("at least one chunk");
        let n = stats.n;
        let sd = (stats.m2 / (n - 1.0)).sqrt();
        let slope = if k > 0.0 { stats.score / n / (2.0 * k) } else { 0.0 };
        se = ((config.c_w * sd / n.sqrt()).powi(2) + (config.c_w * slope * se).powi(2)).sqrt();
        k = config.c_b + config.c_w * stats.mean;
        estimate.push(k);
        stderr.push(se);
    }
    Ok(OracleEstimate { estimate, stderr })
}

/// `count` draws of `N(0, variance · I_dim)`; draw `i` uses stream `(master_seed, i)`.
pub fn limit_gaussian_sampler(
    variance: f64,
    dim: usize,
    count: usize,
    master_seed: u64,
) -> Result<SampleBatch> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "limit variance must be positive, got {variance}"
        )));
    }
    if dim == 0 {
        return Err(Error::ZeroDimension("dimension"));
    }
    if count == 0 {
        return Err(Error::ZeroDimension("sample count"));
    }
    let s = variance.sqrt();
    let rows: Vec<Vec<f64>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::new(master_seed, i).rng();
            (0..dim)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    s * g
                })
                .collect()
        })
        .collect();
    Ok(SampleBatch {
        config_digest: digest_of(&format!("limit-gaussian:{variance}:{dim}")),
        input: Vec::new(),
        dim,
        master_seed,
        values: rows.concat(),
    })
}
