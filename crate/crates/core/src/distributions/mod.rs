//! Standardized weight laws, Gaussian biases and reproducible streams.
//!
//! Every [`WeightLaw`] has mean 0 and variance 1 by construction, so a weight
//! of layer ℓ is `sqrt(C_W / n_{ℓ-1})` times a draw from the law.

mod stream;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

pub use stream::{derive_seed, mix64, RandomStream, StreamRng};

use crate::error::{Error, Result};
use crate::normal;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// A standardized (mean 0, variance 1) univariate law.
///
/// * `gaussian`: N(0, 1), ziggurat sampler.
/// * `laplace`: density `exp(-|x|/b) / 2b` with `b = 1/√2`; sampled as a
///   random sign times a ziggurat exponential.
/// * `rademacher`: ±1 with probability 1/2.
/// * `uniform`: uniform on `[-√3, √3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightLaw {
    Gaussian,
    Laplace,
    Rademacher,
    Uniform,
}

/// Mean, variance and absolute third moment of a law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub abs_third_moment: f64,
}

impl WeightLaw {
    pub const ALL: [WeightLaw; 4] = [
        WeightLaw::Gaussian,
        WeightLaw::Laplace,
        WeightLaw::Rademacher,
        WeightLaw::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightLaw::Gaussian => "gaussian",
            WeightLaw::Laplace => "laplace",
            WeightLaw::Rademacher => "rademacher",
            WeightLaw::Uniform => "uniform",
        }
    }

    /// Exact moments of the standardized law.
    pub fn moments(self) -> MomentSummary {
        let abs_third_moment = match self {
            // E|Y|^p = 2^{p/2} Γ((p+1)/2) / √π at p = 3.
            WeightLaw::Gaussian => 2.0 * (2.0 / PI).sqrt(),
            // 6 b³ with b = 1/√2.
            WeightLaw::Laplace => 3.0 * FRAC_1_SQRT_2,
            WeightLaw::Rademacher => 1.0,
            // ∫_0^{√3} x³ dx / √3 = 9 / (4√3).
            WeightLaw::Uniform => 0.75 * SQRT_3,
        };
        MomentSummary {
            mean: 0.0,
            variance: 1.0,
            abs_third_moment,
        }
    }

    /// E[X⁴]; equals the central fourth moment since the mean is zero.
    pub fn fourth_moment(self) -> f64 {
        match self {
            WeightLaw::Gaussian => 3.0,
            WeightLaw::Laplace => 6.0,
            WeightLaw::Rademacher => 1.0,
            WeightLaw::Uniform => 1.8,
        }
    }

    /// One draw from the standardized law.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            WeightLaw::Gaussian => StandardNormal.sample(rng),
            WeightLaw::Laplace => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    e * FRAC_1_SQRT_2
                } else {
                    -e * FRAC_1_SQRT_2
                }
            }
            WeightLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            WeightLaw::Uniform => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
        }
    }

    /// Inverse CDF at `u ∈ (0, 1)`. Driving two laws with the same `u`
    /// gives their comonotone (quantile) coupling.
    pub fn quantile(self, u: f64) -> f64 {
        match self {
            WeightLaw::Gaussian => normal::quantile(u),
            WeightLaw::Laplace => {
                if u < 0.5 {
                    FRAC_1_SQRT_2 * (2.0 * u).ln()
                } else {
                    -FRAC_1_SQRT_2 * (2.0 * (1.0 - u)).ln()
                }
            }
            WeightLaw::Rademacher => {
                if u < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            WeightLaw::Uniform => SQRT_3 * (2.0 * u - 1.0),
        }
    }
}

/// Stateful sampler for one law. Signs of the Laplace and Rademacher laws are
/// taken one bit at a time from a buffered `u64`, which roughly halves the
/// generator traffic of the symmetric laws. Matrices are always drawn through
/// this type, so materialized and streamed products see the same weights.
#[derive(Debug, Clone)]
pub struct LawSampler {
    law: WeightLaw,
    signs: u64,
    left: u32,
}

impl LawSampler {
    pub fn new(law: WeightLaw) -> Self {
        Self { law, signs: 0, left: 0 }
    }

    #[inline]
    fn sign_bit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        if self.left == 0 {
            self.signs = rng.next_u64();
            self.left = 64;
        }
        let bit = self.signs & 1 == 1;
        self.signs >>= 1;
        self.left -= 1;
        bit
    }

    #[inline]
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        match self.law {
            WeightLaw::Laplace => {
                let e: f64 = Exp1.sample(rng);
                if self.sign_bit(rng) {
                    e * FRAC_1_SQRT_2
                } else {
                    -e * FRAC_1_SQRT_2
                }
            }
            WeightLaw::Rademacher => {
                if self.sign_bit(rng) {
                    1.0
                } else {
                    -1.0
                }
            }
            law => law.sample(rng),
        }
    }
}

/// Exact analytic moments of a standardized law.
pub fn law_moments(law: WeightLaw) -> MomentSummary {
    law.moments()
}

impl fmt::Display for WeightLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightLaw::ALL
            .into_iter()
            .find(|law| law.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "hidden_law",
                    format!("unknown law `{s}` (expected gaussian, laplace, rademacher or uniform)"),
                )
            })
    }
}

/// Uniform draw on the open interval (0, 1) with 53 random bits.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// `self · v` with sequential accumulation inside each row.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(0.0, |acc, (w, x)| acc + w * x))
            .collect()
    }
}

fn check_variance(variance: f64) -> Result<f64> {
    if variance.is_finite() && variance > 0.0 {
        Ok(variance.sqrt())
    } else {
        Err(Error::InvalidArgument(format!(
            "weight variance must be positive and finite, got {variance}"
        )))
    }
}

/// `rows × cols` matrix of i.i.d. entries distributed as `√variance · law`.
///
/// Entries are drawn row by row from `stream`; [`streamed_matvec`] reproduces
/// exactly the same entries without materializing the matrix.
pub fn sample_matrix(
    law: WeightLaw,
    rows: usize,
    cols: usize,
    variance: f64,
    stream: RandomStream,
) -> Result<Matrix> {
    if rows == 0 {
        return Err(Error::ZeroDimension("rows"));
    }
    if cols == 0 {
        return Err(Error::ZeroDimension("cols"));
    }
    let scale = check_variance(variance)?;
    let mut rng = stream.rng();
    let mut sampler = LawSampler::new(law);
    let data = (0..rows * cols).map(|_| scale * sampler.next(&mut rng)).collect();
    Ok(Matrix { rows, cols, data })
}

/// Computes `W · input` where `W = sample_matrix(law, out.len(), input.len(), variance, stream)`,
/// drawing each weight on the fly. Bit-identical to the materialized product.
pub(crate) fn streamed_matvec(
    law: WeightLaw,
    variance: f64,
    stream: RandomStream,
    input: &[f64],
    out: &mut [f64],
) {
    let scale = variance.sqrt();
    let mut rng = stream.rng();
    let mut sampler = LawSampler::new(law);
    for o in out.iter_mut() {
        let mut acc = 0.0;
        for &x in input {
            let w = scale * sampler.next(&mut rng);
            acc += w * x;
        }
        *o = acc;
    }
}

/// Like [`streamed_matvec`], but every weight is an inverse-CDF transform of
/// a shared uniform, producing the original-law and Gaussian products from
/// one stream. Returns nothing; results land in `out_law` and `out_gauss`.
pub(crate) fn coupled_matvec(
    law: WeightLaw,
    variance: f64,
    stream: RandomStream,
    input: &[f64],
    out_law: &mut [f64],
    out_gauss: &mut [f64],
) {
    let scale = variance.sqrt();
    let mut rng = stream.rng();
    for (ol, og) in out_law.iter_mut().zip(out_gauss.iter_mut()) {
        let (mut acc_l, mut acc_g) = (0.0, 0.0);
        for &x in input {
            let u = open_unit(&mut rng);
            acc_l += scale * law.quantile(u) * x;
            acc_g += scale * normal::quantile(u) * x;
        }
        *ol = acc_l;
        *og = acc_g;
    }
}

/// `dim` i.i.d. N(0, c_b) biases. Returns the zero vector without consuming
/// the stream when `c_b = 0`.
pub fn sample_bias(dim: usize, c_b: f64, stream: RandomStream) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::ZeroDimension("bias dimension"));
    }
    if !(c_b.is_finite() && c_b >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bias variance must be nonnegative and finite, got {c_b}"
        )));
    }
    if c_b == 0.0 {
        return Ok(vec![0.0; dim]);
    }
    let scale = c_b.sqrt();
    let mut rng = stream.rng();
    Ok((0..dim)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            scale * g
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_abs_moment(density: impl Fn(f64) -> f64, p: i32, upper: f64) -> f64 {
        // Composite Simpson on [0, upper], doubled by symmetry.
        let n = 200_000;
        let h = upper / n as f64;
        let f = |x: f64| x.abs().powi(p) * density(x);
        let mut s = f(0.0) + f(upper);
        for i in 1..n {
            let x = i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        2.0 * s * h / 3.0
    }

    #[test]
    fn gaussian_third_moment_matches_identity() {
        let m = law_moments(WeightLaw::Gaussian);
        assert_eq!((m.mean, m.variance), (0.0, 1.0));
        assert!((m.abs_third_moment - 1.595_769_121_605_730_7).abs() < 1e-15);
        let quad = brute_force_abs_moment(|x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(), 3, 40.0);
        assert!((quad - m.abs_third_moment).abs() < 1e-12);
    }

    #[test]
    fn laplace_moments_by_integration() {
        let b = FRAC_1_SQRT_2;
        let density = |x: f64| (-x.abs() / b).exp() / (2.0 * b);
        let var = brute_force_abs_moment(density, 2, 60.0);
        let third = brute_force_abs_moment(density, 3, 60.0);
        let fourth = brute_force_abs_moment(density, 4, 60.0);
        assert!((var - 1.0).abs() < 1e-10);
        assert!((third - WeightLaw::Laplace.moments().abs_third_moment).abs() < 1e-10);
        assert!((third - 2.121_320_343_559_642_4).abs() < 1e-10);
        assert!((fourth - WeightLaw::Laplace.fourth_moment()).abs() < 1e-9);
    }

    #[test]
    fn rademacher_and_uniform_moments() {
        assert_eq!(WeightLaw::Rademacher.moments().abs_third_moment, 1.0);
        let u = WeightLaw::Uniform.moments().abs_third_moment;
        // ∫_0^{√3} x³/√3 dx
        assert!((u - 3f64.powi(2) / (4.0 * 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_inequality_holds() {
        for law in WeightLaw::ALL {
            let m = law.moments();
            assert!(m.abs_third_moment > 0.0);
            assert!(m.abs_third_moment >= m.variance.powf(1.5));
        }
    }

    #[test]
    fn empirical_moments_match() {
        let n = 1_000_000;
        for (k, law) in WeightLaw::ALL.into_iter().enumerate() {
            let mut rng = RandomStream::new(11, k as u64).rng();
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let nf = n as f64;
            let mean = xs.iter().sum::<f64>() / nf;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            let abs3: Vec<f64> = xs.iter().map(|x| x.abs().powi(3)).collect();
            let m3 = abs3.iter().sum::<f64>() / nf;
            let m3_sd = (abs3.iter().map(|v| (v - m3).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();

            assert!(mean.abs() < 4.0 / nf.sqrt(), "{law}: mean {mean}");
            let var_tol = 4.0 * law.fourth_moment().sqrt() / nf.sqrt();
            assert!((var - 1.0).abs() < var_tol, "{law}: var {var}");
            let expected = law.moments().abs_third_moment;
            assert!((m3 - expected).abs() <= 4.0 * m3_sd / nf.sqrt(), "{law}: E|X|^3 {m3}");
        }
    }

    #[test]
    fn quantiles_have_the_right_law() {
        // Midpoint quantiles reproduce the moments up to discretization.
        let n = 200_000;
        for law in [WeightLaw::Laplace, WeightLaw::Uniform, WeightLaw::Gaussian] {
            let var = (0..n)
                .map(|i| law.quantile((i as f64 + 0.5) / n as f64).powi(2))
                .sum::<f64>()
                / n as f64;
            assert!((var - 1.0).abs() < 1e-3, "{law}: {var}");
        }
        assert_eq!(WeightLaw::Rademacher.quantile(0.25), -1.0);
        assert_eq!(WeightLaw::Rademacher.quantile(0.75), 1.0);
    }

    #[test]
    fn rademacher_matrix_entries() {
        let m = sample_matrix(WeightLaw::Rademacher, 2, 2, 1.0, RandomStream::new(1, 2)).unwrap();
        assert!(m.as_slice().iter().all(|&w| w == 1.0 || w == -1.0));
    }

    #[test]
    fn gaussian_matrix_variance() {
        let m = sample_matrix(WeightLaw::Gaussian, 1000, 1000, 0.01, RandomStream::new(5, 0)).unwrap();
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m.as_slice().iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // sd of the sample variance: σ² √(2/(n−1)) for Gaussian entries.
        let se = 0.01 * (2.0 / (n - 1.0)).sqrt();
        assert!((var - 0.01).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn matrices_are_deterministic() {
        let s = RandomStream::new(99, 4);
        for law in WeightLaw::ALL {
            let a = sample_matrix(law, 7, 5, 0.3, s).unwrap();
            let b = sample_matrix(law, 7, 5, 0.3, s).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn matrix_rejects_bad_shapes() {
        let s = RandomStream::new(0, 0);
        assert!(matches!(
            sample_matrix(WeightLaw::Gaussian, 0, 3, 1.0, s),
            Err(Error::ZeroDimension(_))
        ));
        assert!(sample_matrix(WeightLaw::Gaussian, 3, 0, 1.0, s).is_err());
        assert!(sample_matrix(WeightLaw::Gaussian, 3, 3, 0.0, s).is_err());
    }

    #[test]
    fn streamed_product_matches_matrix() {
        let s = RandomStream::new(3, 8);
        let x: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin()).collect();
        for law in WeightLaw::ALL {
            let m = sample_matrix(law, 6, 9, 0.25, s).unwrap();
            let mut out = vec![0.0; 6];
            streamed_matvec(law, 0.25, s, &x, &mut out);
            assert_eq!(m.mul_vec(&x), out);
        }
    }

    #[test]
    fn coupled_product_is_gaussian_for_gaussian_law() {
        let s = RandomStream::new(3, 9);
        let x = [0.5, -1.0, 2.0];
        let (mut a, mut b) = (vec![0.0; 4], vec![0.0; 4]);
        coupled_matvec(WeightLaw::Gaussian, 1.0, s, &x, &mut a, &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn bias_cases() {
        let s = RandomStream::new(1, 1);
        assert_eq!(sample_bias(5, 0.0, s).unwrap(), vec![0.0; 5]);
        assert_eq!(sample_bias(3, 0.7, s).unwrap(), sample_bias(3, 0.7, s).unwrap());
        assert!(sample_bias(0, 1.0, s).is_err());
        assert!(sample_bias(2, -1.0, s).is_err());

        let n = 1_000_000;
        let b = sample_bias(n, 1.0, RandomStream::new(8, 8)).unwrap();
        let mean = b.iter().sum::<f64>() / n as f64;
        let var = b.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn law_names_round_trip() {
        for law in WeightLaw::ALL {
            assert_eq!(law.name().parse::<WeightLaw>().unwrap(), law);
            let json = serde_json::to_string(&law).unwrap();
            assert_eq!(json, format!("\"{}\"", law.name()));
        }
        assert!("cauchy".parse::<WeightLaw>().is_err());
    }
}
