use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::path::{distance, norm};
use crate::error::{Error, Result};

/// Dykstra stopping threshold on the per-sweep movement.
pub const TAU_PROJ: f64 = 1e-10;
/// Interior test scale, multiplied by the domain diameter.
pub const TAU_INT_REL: f64 = 1e-9;
/// Slack in the normal-cone inner product check.
pub const TAU_CONE: f64 = 1e-8;
/// Dykstra sweep limit.
pub const MAX_ITER: usize = 10_000;

const BOUNDEDNESS_PROBES: usize = 10_000;

/// Closed convex region `{x : n_i·x <= d_i}` with unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    normals: Vec<f64>,
    offsets: Vec<f64>,
    witness: Vec<f64>,
    diameter: f64,
}

impl Polytope {
    /// `interior` must satisfy every constraint strictly.
    pub fn new(normals: Vec<Vec<f64>>, offsets: Vec<f64>, interior: Vec<f64>) -> Result<Self> {
        let dim = interior.len();
        if dim == 0 {
            return Err(Error::InvalidDomain("polytope dimension must be positive".into()));
        }
        if normals.len() != offsets.len() || normals.is_empty() {
            return Err(Error::InvalidDomain(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        let mut flat = Vec::with_capacity(normals.len() * dim);
        for (i, n) in normals.iter().enumerate() {
            if n.len() != dim {
                return Err(Error::InvalidDomain(format!(
                    "normal {i} has dimension {}, expected {dim}",
                    n.len()
                )));
            }
            if (norm(n) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDomain(format!(
                    "normal {i} is not a unit vector (norm {})",
                    norm(n)
                )));
            }
            flat.extend_from_slice(n);
        }
        let mut poly = Self {
            dim,
            normals: flat,
            offsets,
            witness: interior,
            diameter: 0.0,
        };
        for i in 0..poly.n_faces() {
            if poly.slack(i, &poly.witness) <= 0.0 {
                return Err(Error::InvalidDomain(format!(
                    "interior witness violates or touches face {i}"
                )));
            }
        }
        poly.check_bounded()?;
        poly.diameter = poly.estimate_diameter()?;
        Ok(poly)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_faces(&self) -> usize {
        self.offsets.len()
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    pub fn witness(&self) -> &[f64] {
        &self.witness
    }

    /// `d_i - n_i·x`; nonnegative inside face `i`.
    fn slack(&self, i: usize, x: &[f64]) -> f64 {
        self.offsets[i] - dot(self.normal(i), x)
    }

    fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.n_faces())
            .map(|i| -self.slack(i, x))
            .fold(0.0, f64::max)
    }

    // A recession direction u has n_i·u <= 0 for every face; probe random directions for one.
    fn check_bounded(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_b0ad);
        let mut u = vec![0.0; self.dim];
        let axis_probes = (0..2 * self.dim).map(|k| {
            let mut e = vec![0.0; self.dim];
            e[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
            e
        });
        for probe in axis_probes {
            if self.is_recession(&probe) {
                return Err(Error::InvalidDomain(format!(
                    "polytope is unbounded along {probe:?}"
                )));
            }
        }
        for _ in 0..BOUNDEDNESS_PROBES {
            for v in u.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            if self.is_recession(&u) {
                return Err(Error::InvalidDomain(format!(
                    "polytope is unbounded along {u:?}"
                )));
            }
        }
        Ok(())
    }

    fn is_recession(&self, u: &[f64]) -> bool {
        (0..self.n_faces()).all(|i| dot(self.normal(i), u) <= 0.0)
    }

    // Bounding-box diagonal from support points along the coordinate axes.
    fn estimate_diameter(&self) -> Result<f64> {
        let scale = 1e6 * (1.0 + norm(&self.witness));
        let mut extent = 0.0;
        for k in 0..self.dim {
            let mut hi = self.witness.clone();
            hi[k] += scale;
            let mut lo = self.witness.clone();
            lo[k] -= scale;
            self.project_into(&mut hi)?;
            self.project_into(&mut lo)?;
            extent += (hi[k] - lo[k]).powi(2);
        }
        Ok(extent.sqrt())
    }

    /// Dykstra's alternating projection onto the half-spaces.
    pub fn project_into(&self, y: &mut [f64]) -> Result<()> {
        if self.max_violation(y) == 0.0 {
            return Ok(());
        }
        let m = self.n_faces();
        let d = self.dim;
        let mut corrections = vec![0.0; m * d];
        let mut z = vec![0.0; d];
        let mut prev = y.to_vec();
        for _ in 0..MAX_ITER {
            prev.copy_from_slice(y);
            for i in 0..m {
                let p = &mut corrections[i * d..(i + 1) * d];
                for ((zk, &yk), &pk) in z.iter_mut().zip(y.iter()).zip(p.iter()) {
                    *zk = yk + pk;
                }
                let n = &self.normals[i * d..(i + 1) * d];
                let excess = dot(n, &z) - self.offsets[i];
                for k in 0..d {
                    y[k] = if excess > 0.0 { z[k] - excess * n[k] } else { z[k] };
                    p[k] = z[k] - y[k];
                }
            }
            if distance(&prev, y) < TAU_PROJ {
                return Ok(());
            }
        }
        Err(Error::ProjectionNonConvergence {
            iterations: MAX_ITER,
            residual: self.max_violation(y),
        })
    }
}

/// A closed convex region together with the queries the reflection schemes need.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainShape {
    /// `[origin, ∞)`; unbounded, so only used as an exact test oracle.
    HalfLine { origin: f64 },
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polytope(Polytope),
}

impl DomainShape {
    pub fn half_line(origin: f64) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::InvalidDomain("half-line origin must be finite".into()));
        }
        Ok(Self::HalfLine { origin })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidDomain(format!("interval needs a < b, got [{a}, {b}]")));
        }
        Ok(Self::Interval { a, b })
    }

    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidDomain("box bounds must have equal, positive length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(Error::InvalidDomain(format!("box needs lo < hi componentwise, got {lo:?} / {hi:?}")));
        }
        Ok(Self::Box { lo, hi })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain("ball center must be a finite vector".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidDomain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn polytope(normals: Vec<Vec<f64>>, offsets: Vec<f64>, interior: Vec<f64>) -> Result<Self> {
        Polytope::new(normals, offsets, interior).map(Self::Polytope)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::HalfLine { .. } | Self::Interval { .. } => 1,
            Self::Box { lo, .. } => lo.len(),
            Self::Ball { center, .. } => center.len(),
            Self::Polytope(p) => p.dim(),
        }
    }

    pub fn is_oracle_only(&self) -> bool {
        matches!(self, Self::HalfLine { .. })
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Self::HalfLine { .. } => f64::INFINITY,
            Self::Interval { a, b } => b - a,
            Self::Box { lo, hi } => distance(lo, hi),
            Self::Ball { radius, .. } => 2.0 * radius,
            Self::Polytope(p) => p.diameter,
        }
    }

    /// Distance below which a point counts as on the boundary.
    pub fn tau_int(&self) -> f64 {
        let diam = self.diameter();
        if diam.is_finite() {
            TAU_INT_REL * diam
        } else {
            TAU_INT_REL
        }
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    /// For polytopes outside points report the largest constraint violation instead.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Self::HalfLine { origin } => x[0] - origin,
            Self::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
            Self::Ball { center, radius } => radius - distance(x, center),
            Self::Polytope(p) => (0..p.n_faces())
                .map(|i| p.slack(i, x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.boundary_distance(x) >= -tol
    }

    pub fn is_interior(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > self.tau_int()
    }

    /// A point strictly inside the domain.
    pub fn interior_point(&self) -> Vec<f64> {
        match self {
            Self::HalfLine { origin } => vec![origin + 1.0],
            Self::Interval { a, b } => vec![0.5 * (a + b)],
            Self::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            Self::Ball { center, .. } => center.clone(),
            Self::Polytope(p) => p.witness.clone(),
        }
    }

    /// Draws a point of the closure; uniform on bounded kinds except the polytope,
    /// which is sampled by rejection from a box around the witness.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Self::HalfLine { origin } => vec![origin + 10.0 * rng.random::<f64>()],
            Self::Interval { a, b } => vec![a + (b - a) * rng.random::<f64>()],
            Self::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect(),
            Self::Ball { center, radius } => loop {
                let v: Vec<f64> = center
                    .iter()
                    .map(|_| radius * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                if norm(&v) <= *radius {
                    break v.iter().zip(center).map(|(a, c)| a + c).collect();
                }
            },
            Self::Polytope(p) => loop {
                let v: Vec<f64> = p
                    .witness
                    .iter()
                    .map(|w| w + p.diameter * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                if p.max_violation(&v) == 0.0 {
                    break v;
                }
            },
        }
    }

    /// Replaces `y` by its closest point in the closure of the domain.
    /// Points already in the closure are left bit-for-bit unchanged.
    pub fn project_into(&self, y: &mut [f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, domain has {}",
                y.len(),
                self.dim()
            )));
        }
        match self {
            Self::HalfLine { origin } => {
                if y[0] < *origin {
                    y[0] = *origin;
                }
            }
            Self::Interval { a, b } => {
                y[0] = y[0].clamp(*a, *b);
            }
            Self::Box { lo, hi } => {
                for ((v, l), h) in y.iter_mut().zip(lo).zip(hi) {
                    *v = v.clamp(*l, *h);
                }
            }
            Self::Ball { center, radius } => {
                let r = distance(y, center);
                if r > *radius {
                    let scale = radius / r;
                    for (v, c) in y.iter_mut().zip(center) {
                        *v = c + (*v - c) * scale;
                    }
                }
            }
            Self::Polytope(p) => p.project_into(y)?,
        }
        Ok(())
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = y.to_vec();
        self.project_into(&mut out)?;
        Ok(out)
    }

    /// One step of the projection scheme: `x_new = P(x + delta)`, `dk = x_new - (x + delta)`.
    pub fn reflect_increment(&self, x: &[f64], delta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != delta.len() {
            return Err(Error::DimensionMismatch("x and delta differ in length".into()));
        }
        let y: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
        let x_new = self.project(&y)?;
        let dk = x_new.iter().zip(&y).map(|(a, b)| a - b).collect();
        Ok((x_new, dk))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
