//! Experiment drivers built on the network, kernel and metrics modules.

mod ablation;
mod conditional;
pub mod emit;
mod fit;
mod last_layer;
mod study;

pub use ablation::{
    run_switch_ablation, run_switch_ablation_with, Coupling, Observable, SwitchDecayRow, SwitchDecayTable,
};
pub use conditional::{conditional_gaussian_check, ConditionalCheck};
pub use fit::{fit_convergence, fit_rate, fit_switch, RateFit, DEFAULT_MIN_WIDTH};
pub use last_layer::{run_last_layer_check, LastLayerRow, LastLayerTable};
pub use study::{
    run_convergence_study, ConvergenceRow, ConvergenceTable, SampleRule, StudyConfig, DEFAULT_SEED,
};
