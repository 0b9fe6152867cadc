//! Reflected stochastic differential equations in bounded convex domains,
//! driven by smooth approximations of Brownian motion.
//!
//! The crate couples two solutions on a shared Brownian path: a projected
//! Euler–Maruyama solution of the Itô equation with corrected drift, and a
//! projected fine-step solution of the random ODE driven by a shifted
//! mollifier, piecewise-linear or McShane approximation. Monte Carlo
//! estimators for the driver correction statistics and a strong-convergence
//! study sit on top.

pub mod cli;
pub mod domain;
pub mod driver;
pub mod experiment;
pub mod error;
pub mod mc;
pub mod sde;

pub use error::{Error, Result};
