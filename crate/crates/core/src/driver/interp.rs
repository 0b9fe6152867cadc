use super::quad::adaptive_simpson;
use crate::error::{Error, Result};

const ENDPOINT_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-6;
const CHECK_POINTS: usize = 101;

/// Polynomial `Σ c_k u^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn deriv(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * u + k as f64 * c)
    }

    /// Exact integral over `[0, 1]`.
    pub fn integral_unit(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / (k + 1) as f64)
            .sum()
    }
}

// Central differences against the analytic derivative on [h, 1-h].
fn check_derivative(name: &str, f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64) -> Result<()> {
    for i in 0..CHECK_POINTS {
        let u = FD_STEP + (1.0 - 2.0 * FD_STEP) * i as f64 / (CHECK_POINTS - 1) as f64;
        let fd = (f(u + FD_STEP) - f(u - FD_STEP)) / (2.0 * FD_STEP);
        let exact = df(u);
        if (fd - exact).abs() > FD_TOL * (1.0 + exact.abs()) {
            return Err(Error::InvalidDriver(format!(
                "{name}: derivative inconsistent at u = {u} (analytic {exact}, finite difference {fd})"
            )));
        }
    }
    Ok(())
}

/// A `C¹` function on `[0, 1]` with `f(0) = 0` and `f(1) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    name: String,
    poly: Polynomial,
}

impl Interpolant {
    pub fn named(name: &str) -> Result<Self> {
        let coeffs = match name {
            "linear" => vec![0.0, 1.0],
            "quadratic" => vec![0.0, 0.0, 1.0],
            "cubic" => vec![0.0, 0.0, 0.0, 1.0],
            "smoothstep" => vec![0.0, 0.0, 3.0, -2.0],
            other => {
                return Err(Error::InvalidDriver(format!(
                    "unknown interpolant '{other}' (expected linear, quadratic, cubic or smoothstep)"
                )))
            }
        };
        Self::build(name.to_string(), coeffs)
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::build(format!("poly{coeffs:?}"), coeffs)
    }

    fn build(name: String, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDriver(format!("{name}: coefficients must be finite")));
        }
        let poly = Polynomial::new(coeffs);
        let f0 = poly.eval(0.0);
        let f1 = poly.eval(1.0);
        if f0.abs() > ENDPOINT_TOL || (f1 - 1.0).abs() > ENDPOINT_TOL {
            return Err(Error::InvalidDriver(format!(
                "{name}: interpolant needs f(0) = 0 and f(1) = 1, got {f0} and {f1}"
            )));
        }
        check_derivative(&name, &|u| poly.eval(u), &|u| poly.deriv(u))?;
        Ok(Self { name, poly })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.poly.eval(u)
    }

    pub fn deriv(&self, u: f64) -> f64 {
        self.poly.deriv(u)
    }
}

/// Mollifier kernel: nonnegative, supported in `[0, 1]`, unit mass, vanishing at both ends.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `C·exp(-1/(1-(2s-1)²))`, smooth with compact support.
    Bump { scale: f64 },
    Polynomial { name: String, poly: Polynomial },
}

impl Kernel {
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "bump" => Ok(Self::bump()),
            // 30 s²(1-s)²
            "poly" | "polynomial" => Self::polynomial(vec![0.0, 0.0, 30.0, -60.0, 30.0]),
            other => Err(Error::InvalidDriver(format!(
                "unknown kernel '{other}' (expected bump or poly)"
            ))),
        }
    }

    pub fn bump() -> Self {
        let mass = adaptive_simpson(&|s| bump_shape(s), 0.0, 1.0, 1e-15);
        Self::Bump { scale: 1.0 / mass }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let name = format!("poly{coeffs:?}");
        let kernel = Self::Polynomial {
            name,
            poly: Polynomial::new(coeffs),
        };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Bump { .. } => "bump",
            Self::Polynomial { name, .. } => name,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        match self {
            Self::Bump { scale } => scale * bump_shape(s),
            Self::Polynomial { poly, .. } => poly.eval(s),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        match self {
            Self::Bump { scale } => {
                let u = 2.0 * s - 1.0;
                let q = 1.0 - u * u;
                if q <= 0.0 {
                    return 0.0;
                }
                scale * bump_shape(s) * (-4.0 * u / (q * q))
            }
            Self::Polynomial { poly, .. } => poly.deriv(s),
        }
    }

    fn validate(&self) -> Result<()> {
        let name = self.name().to_string();
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            let v = self.eval(s);
            if !(v >= 0.0) {
                return Err(Error::InvalidDriver(format!(
                    "{name}: kernel is negative at s = {s} ({v})"
                )));
            }
        }
        if self.eval(0.0).abs() > ENDPOINT_TOL || self.eval(1.0).abs() > ENDPOINT_TOL {
            return Err(Error::InvalidDriver(format!(
                "{name}: kernel must vanish at 0 and 1"
            )));
        }
        let mass = adaptive_simpson(&|s| self.eval(s), 0.0, 1.0, 1e-13);
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDriver(format!(
                "{name}: kernel integrates to {mass}, expected 1"
            )));
        }
        check_derivative(&name, &|s| self.eval(s), &|s| self.deriv(s))
    }
}

fn bump_shape(s: f64) -> f64 {
    let u = 2.0 * s - 1.0;
    let q = 1.0 - u * u;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}
