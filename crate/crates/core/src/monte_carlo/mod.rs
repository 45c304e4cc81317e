//! Simulation designs, accuracy metrics and the replication study.

pub mod dgp;
pub mod metrics;
pub mod study;

pub use dgp::{g_cubic, g_fourier, simulate_dgp, true_irf, DgpKind, DgpSpec, GFunction};
pub use metrics::{coverage_and_width, rimse, trapezoid};
pub use study::{run_replication, run_study, Estimator, GridSpec, McConfig, McResult};
