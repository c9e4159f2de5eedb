//! Monte Carlo data-generating processes, accuracy metrics and study runner.

pub mod dgp;
pub mod metrics;
pub mod study;

pub use dgp::{gen_panel, gen_panel_with, true_paths, Dgp, DgpSpec, ErrorModel, TruePanel};
pub use metrics::{ari, rmse_paths};
pub use study::{
    run_study, CoverageCell, CoverageConfig, ReplicationRecord, StudyConfig, StudyReport,
};
