//! Coupled Monte Carlo convergence studies, checks of the statistics
//! recursion and limit, and empirical rate fitting.

mod checks;
mod rate;
mod study;

pub use checks::{
    n_of_delta, verify_prop1, verify_recursion, LimitRow, LimitTable, RecursionRow, RecursionTable, BANDS,
};
pub use rate::{fit_rate, RateFit};
pub use study::{
    run_convergence_study, ConvergenceReport, CorrectionMode, Diagnostics, MeshDiagnostics, ProxyBias,
    ReportRow, SlopeRow, StudyConfig, StudyParams,
};
