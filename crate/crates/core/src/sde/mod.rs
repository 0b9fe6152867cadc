//! Coefficients of the reflected equation, the corrected drift, and the coupled
//! pair of integrators: projected Euler–Maruyama for the Itô equation and a
//! projected fine-step scheme for the ODE driven by `B^δ`.

mod coeffs;
mod integrate;

pub use coeffs::{
    check_coefficients, corrected_drift, CoefficientSpec, Coefficients, Preset, SigmaKind,
    CHECK_POINTS, DSIGMA_REL_TOL, PRESET_NAMES,
};
pub use integrate::{
    coupled_sup_error, integrate_driven_reflected, integrate_ito_reflected, ReflectedSolution, Scheme,
};

pub(crate) use integrate::sup_error_paths;
