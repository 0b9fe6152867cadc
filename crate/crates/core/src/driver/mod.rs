//! Smooth approximations `G^δ` of a Brownian path, the shifted driver `B^δ`,
//! and estimators for the correction statistics `s`, `c` and `c*`.

mod approx;
mod config;
mod brownian;
mod interp;
mod quad;
mod stats;

pub use approx::{ApproxDriver, DriverKind};
pub use config::{DriverSpec, ShapeSpec};
pub use brownian::{sample_brownian, BrownianPath, GENERATOR_ID};
pub use interp::{Interpolant, Kernel, Polynomial};
pub use quad::adaptive_simpson;
pub use stats::{
    estimate_c, estimate_c_star, estimate_s, estimate_statistics, limit_correction,
    scaling_check, CorrectionMatrix, MatrixEstimate, PathSource, PathStatistics,
    Provenance, ScalingRow, StatisticsEstimate, StatsSetup, DEFAULT_SUBSTEPS, MIN_SAMPLES,
};
