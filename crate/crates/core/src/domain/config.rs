use serde::{Deserialize, Serialize};

use super::shape::DomainShape;
use crate::error::Result;

/// Declarative form of a [`DomainShape`], e.g. `kind = "interval"`, `a = 0.0`, `b = 1.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    HalfLine {
        #[serde(default)]
        origin: f64,
    },
    Interval {
        a: f64,
        b: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        interior: Vec<f64>,
    },
}

impl DomainSpec {
    pub fn build(&self) -> Result<DomainShape> {
        match self {
            Self::HalfLine { origin } => DomainShape::half_line(*origin),
            Self::Interval { a, b } => DomainShape::interval(*a, *b),
            Self::Box { lo, hi } => DomainShape::cuboid(lo.clone(), hi.clone()),
            Self::Ball { center, radius } => DomainShape::ball(center.clone(), *radius),
            Self::Polytope {
                normals,
                offsets,
                interior,
            } => DomainShape::polytope(normals.clone(), offsets.clone(), interior.clone()),
        }
    }
}
