//! Random fully connected networks with general weight laws and their
//! infinite-width Gaussian limits.
//!
//! - [`distributions`]: standardized weight laws, Gaussian biases, reproducible streams
//! - [`network`]: forward passes, layer-switched hybrids, output batches
//! - [`kernel`]: the limit covariance recursion by Gauss–Hermite quadrature, with a Monte Carlo oracle
//! - [`metrics`]: Kolmogorov and Wasserstein distances, Hilbert–Schmidt moments, the conditional-Gaussian W2 bound
//! - [`experiments`]: convergence studies, switching ablations, last-layer checks, rate fits and result files

pub mod distributions;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod metrics;
pub mod network;
mod normal;

pub use distributions::{law_moments, sample_bias, sample_matrix, MomentSummary, RandomStream, WeightLaw};
pub use error::{Error, Result};
pub use kernel::{
    kernel_cross_sequence, kernel_diag_sequence, kernel_mc_oracle, limit_gaussian_sampler, KernelSequence,
    QuadratureRule,
};
pub use metrics::{
    conditional_variance, entropic_w2_bound, estimate_hs_moments, kolmogorov_distance, wasserstein_p_empirical,
    wasserstein_p_vs_gaussian, DistanceReport, Metric,
};
pub use experiments::{
    conditional_gaussian_check, fit_rate, run_convergence_study, run_last_layer_check, run_switch_ablation, ConvergenceTable,
    RateFit, StudyConfig, SwitchDecayTable,
};
pub use network::{
    forward, forward_projected, sample_outputs, Activation, InputSpec, LayerOutputs, NetworkConfig, SampleBatch,
};
