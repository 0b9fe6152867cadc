use serde::{Deserialize, Serialize};

use super::approx::DriverKind;
use super::interp::{Interpolant, Kernel};
use crate::error::Result;

/// A named interpolant (`"linear"`, `"quadratic"`, ...) or polynomial coefficients, lowest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeSpec {
    Named(String),
    Coefficients(Vec<f64>),
}

impl ShapeSpec {
    fn named(name: &str) -> Self {
        Self::Named(name.to_string())
    }

    fn interpolant(&self) -> Result<Interpolant> {
        match self {
            Self::Named(n) => Interpolant::named(n),
            Self::Coefficients(c) => Interpolant::polynomial(c.clone()),
        }
    }

    fn kernel(&self) -> Result<Kernel> {
        match self {
            Self::Named(n) => Kernel::named(n),
            Self::Coefficients(c) => Kernel::polynomial(c.clone()),
        }
    }
}

fn linear() -> ShapeSpec {
    ShapeSpec::named("linear")
}

fn quadratic() -> ShapeSpec {
    ShapeSpec::named("quadratic")
}

fn bump() -> ShapeSpec {
    ShapeSpec::named("bump")
}

/// Declarative form of a [`DriverKind`], e.g. `kind = "mcshane"`, `f1 = "linear"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriverSpec {
    PiecewiseLinear {
        #[serde(default = "linear")]
        interpolant: ShapeSpec,
    },
    Mollifier {
        #[serde(default = "bump")]
        kernel: ShapeSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quad_points: Option<usize>,
    },
    Mcshane {
        #[serde(default = "linear")]
        f1: ShapeSpec,
        #[serde(default = "quadratic")]
        f2: ShapeSpec,
    },
}

impl DriverSpec {
    pub fn piecewise_linear() -> Self {
        Self::PiecewiseLinear { interpolant: linear() }
    }

    pub fn mollifier() -> Self {
        Self::Mollifier {
            kernel: bump(),
            quad_points: None,
        }
    }

    pub fn mcshane() -> Self {
        Self::Mcshane {
            f1: linear(),
            f2: quadratic(),
        }
    }

    pub fn build(&self) -> Result<DriverKind> {
        Ok(match self {
            Self::PiecewiseLinear { interpolant } => DriverKind::piecewise_linear(interpolant.interpolant()?),
            Self::Mollifier { kernel, quad_points } => DriverKind::Mollifier {
                kernel: kernel.kernel()?,
                quad_points: *quad_points,
            },
            Self::Mcshane { f1, f2 } => DriverKind::mcshane(f1.interpolant()?, f2.interpolant()?),
        })
    }
}
