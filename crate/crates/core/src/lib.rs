//! Latent group structures in time-varying panel regressions.
//!
//! Slope functions are approximated with B-spline sieves; units sharing a
//! trajectory are grouped by an adaptive pairwise fusion penalty solved with
//! ADMM, and the number of groups is chosen with an information criterion.

pub mod error;
pub mod grouping;
pub mod inference;
mod linalg;
pub mod panel;
pub mod selection;
pub mod simulation;
pub mod solver;
pub mod spline;

pub use error::{Error, Result};
pub use grouping::{fit_lambda, GroupedFit, Partition};
pub use panel::{build_design, Panel, SieveDesign, UnitSeries};
pub use selection::{select_lambda, LambdaGrid, SelectionResult};
pub use solver::FitConfig;
pub use spline::{SplineBasis, SplineConfig};
