use std::f64::consts::{FRAC_PI_2, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::DomainShape;
use crate::driver::CorrectionMatrix;
use crate::error::{Error, Result};

/// Coefficients `σ` and `b` of a reflected SDE with state dimension `d` and noise dimension `r`.
///
/// Implementations must be stateless: the integrators call them from many threads.
/// Layouts are row-major: `sigma[l * r + j] = σ_j^l` and
/// `dsigma[(l * r + j) * d + α] = ∂_α σ_j^l`.
pub trait Coefficients: Send + Sync {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn sigma(&self, x: &[f64], out: &mut [f64]);
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn dsigma(&self, x: &[f64], out: &mut [f64]);
    /// A Lipschitz constant for `σ` and `b`; informational only.
    fn lipschitz_hint(&self) -> f64;
    /// `σ` does not depend on the state, so the drift correction vanishes.
    fn sigma_is_constant(&self) -> bool {
        false
    }
}

/// Which diffusion coefficient a [`Preset`] uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaKind {
    /// Every entry of `σ` equals `value`.
    Additive { value: f64 },
    /// `σ_j^l(x) = a + b·sin(2π x_l + jπ/2)`, so `r = 2` pairs a sine with a cosine.
    Trig { a: f64, b: f64 },
    /// `σ_j^l(x) = scale·x_l`.
    LinearSigma { scale: f64 },
}

/// Built-in coefficients with drift `b^l(x) = drift_constant + drift_linear·x_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub kind: SigmaKind,
    pub d: usize,
    pub r: usize,
    pub drift_constant: f64,
    pub drift_linear: f64,
}

impl Preset {
    pub fn new(kind: SigmaKind, d: usize, r: usize, drift_constant: f64, drift_linear: f64) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(Error::InvalidCoefficients(format!(
                "dimensions must be positive, got d = {d}, r = {r}"
            )));
        }
        let params: &[f64] = match &kind {
            SigmaKind::Additive { value } => &[*value],
            SigmaKind::Trig { a, b } => &[*a, *b],
            SigmaKind::LinearSigma { scale } => &[*scale],
        };
        if params.iter().chain([&drift_constant, &drift_linear]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCoefficients("parameters must be finite".into()));
        }
        Ok(Self {
            kind,
            d,
            r,
            drift_constant,
            drift_linear,
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SigmaKind::Additive { .. } => "additive",
            SigmaKind::Trig { .. } => "trig",
            SigmaKind::LinearSigma { .. } => "linear-sigma",
        }
    }
}

impl Coefficients for Preset {
    fn state_dim(&self) -> usize {
        self.d
    }

    fn noise_dim(&self) -> usize {
        self.r
    }

    fn sigma(&self, x: &[f64], out: &mut [f64]) {
        let r = self.r;
        match self.kind {
            SigmaKind::Additive { value } => out.fill(value),
            SigmaKind::Trig { a, b } => {
                for (row, &xl) in out.chunks_exact_mut(r).zip(x) {
                    for (j, o) in row.iter_mut().enumerate() {
                        *o = a + b * (TAU * xl + j as f64 * FRAC_PI_2).sin();
                    }
                }
            }
            SigmaKind::LinearSigma { scale } => {
                for (row, &xl) in out.chunks_exact_mut(r).zip(x) {
                    row.fill(scale * xl);
                }
            }
        }
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.drift_constant + self.drift_linear * v;
        }
    }

    fn dsigma(&self, x: &[f64], out: &mut [f64]) {
        let (d, r) = (self.d, self.r);
        out.fill(0.0);
        if let SigmaKind::Additive { .. } = self.kind {
            return;
        }
        for l in 0..d {
            for j in 0..r {
                out[(l * r + j) * d + l] = match self.kind {
                    SigmaKind::Trig { b, .. } => b * TAU * (TAU * x[l] + j as f64 * FRAC_PI_2).cos(),
                    SigmaKind::LinearSigma { scale } => scale,
                    SigmaKind::Additive { .. } => 0.0,
                };
            }
        }
    }

    fn sigma_is_constant(&self) -> bool {
        matches!(self.kind, SigmaKind::Additive { .. })
    }

    fn lipschitz_hint(&self) -> f64 {
        let s = match self.kind {
            SigmaKind::Additive { .. } => 0.0,
            SigmaKind::Trig { b, .. } => b.abs() * TAU,
            SigmaKind::LinearSigma { scale } => scale.abs(),
        };
        s.max(self.drift_linear.abs())
    }
}

/// Config form of a [`Preset`], resolved by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub preset: String,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default = "one")]
    pub r: usize,
    /// Entry value for "additive" (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Offset for "trig" (default 0.3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Amplitude for "trig" (default 0.2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Slope for "linear-sigma" (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default)]
    pub drift_constant: f64,
    #[serde(default)]
    pub drift_linear: f64,
}

fn one() -> usize {
    1
}

pub const PRESET_NAMES: &[&str] = &["additive", "trig", "linear-sigma"];

impl CoefficientSpec {
    pub fn named(preset: &str) -> Self {
        Self {
            preset: preset.to_string(),
            d: 1,
            r: 1,
            sigma: None,
            a: None,
            b: None,
            scale: None,
            drift_constant: 0.0,
            drift_linear: 0.0,
        }
    }

    pub fn build(&self) -> Result<Preset> {
        let unused = |names: &[(&str, Option<f64>)]| -> Result<()> {
            match names.iter().find(|(_, v)| v.is_some()) {
                Some((n, _)) => Err(Error::InvalidConfig(format!(
                    "parameter `{n}` does not apply to preset \"{}\"",
                    self.preset
                ))),
                None => Ok(()),
            }
        };
        let kind = match self.preset.as_str() {
            "additive" => {
                unused(&[("a", self.a), ("b", self.b), ("scale", self.scale)])?;
                SigmaKind::Additive {
                    value: self.sigma.unwrap_or(1.0),
                }
            }
            "trig" => {
                unused(&[("sigma", self.sigma), ("scale", self.scale)])?;
                SigmaKind::Trig {
                    a: self.a.unwrap_or(0.3),
                    b: self.b.unwrap_or(0.2),
                }
            }
            "linear-sigma" => {
                unused(&[("sigma", self.sigma), ("a", self.a), ("b", self.b)])?;
                SigmaKind::LinearSigma {
                    scale: self.scale.unwrap_or(1.0),
                }
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown coefficient preset \"{other}\" (known: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Preset::new(kind, self.d, self.r, self.drift_constant, self.drift_linear)
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Scratch buffers for repeated coefficient evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pub sigma: Vec<f64>,
    pub dsigma: Vec<f64>,
    pub drift: Vec<f64>,
}

impl Workspace {
    pub fn new(d: usize, r: usize) -> Self {
        Self {
            sigma: vec![0.0; d * r],
            dsigma: vec![0.0; d * r * d],
            drift: vec![0.0; d],
        }
    }
}

pub(crate) fn check_correction(coeffs: &dyn Coefficients, c: &CorrectionMatrix) -> Result<()> {
    if c.r != coeffs.noise_dim() {
        return Err(Error::DimensionMismatch(format!(
            "correction matrix is {0}×{0} but the noise dimension is {1}",
            c.r,
            coeffs.noise_dim()
        )));
    }
    Ok(())
}

/// `σ(x)` and `b̄(x)` into `ws.sigma` and `ws.drift`.
pub(crate) fn corrected_drift_into(
    coeffs: &dyn Coefficients,
    c: &CorrectionMatrix,
    x: &[f64],
    ws: &mut Workspace,
) {
    let (d, r) = (coeffs.state_dim(), coeffs.noise_dim());
    coeffs.sigma(x, &mut ws.sigma);
    coeffs.drift(x, &mut ws.drift);
    if coeffs.sigma_is_constant() {
        return;
    }
    coeffs.dsigma(x, &mut ws.dsigma);
    for l in 0..d {
        let mut acc = 0.0;
        for i in 0..r {
            for j in 0..r {
                let cij = c.c[i * r + j];
                if cij == 0.0 {
                    continue;
                }
                let mut dir = 0.0;
                for a in 0..d {
                    dir += ws.sigma[a * r + i] * ws.dsigma[(l * r + j) * d + a];
                }
                acc += cij * dir;
            }
        }
        ws.drift[l] += acc;
    }
}

/// `b̄^l(x) = b^l(x) + Σ_{i,j,α} c_ij σ_i^α(x) ∂_α σ_j^l(x)`.
pub fn corrected_drift(coeffs: &dyn Coefficients, c: &CorrectionMatrix, x: &[f64]) -> Result<Vec<f64>> {
    check_correction(coeffs, c)?;
    if x.len() != coeffs.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has length {} but the coefficients expect {}",
            x.len(),
            coeffs.state_dim()
        )));
    }
    let mut ws = Workspace::new(coeffs.state_dim(), coeffs.noise_dim());
    corrected_drift_into(coeffs, c, x, &mut ws);
    Ok(ws.drift)
}

/// Sample points used by [`check_coefficients`].
pub const CHECK_POINTS: usize = 100;
/// Largest accepted relative error of `dsigma` against central differences.
pub const DSIGMA_REL_TOL: f64 = 1e-5;

/// Validates `dsigma` against central differences of `sigma` at random points of the
/// domain, and that `σ` and `b` are finite there. Relative errors are taken against
/// `max(1, |∂σ|)` so entries that vanish identically do not divide by zero.
pub fn check_coefficients(coeffs: &dyn Coefficients, domain: &DomainShape, seed: u64) -> Result<f64> {
    let (d, r) = (coeffs.state_dim(), coeffs.noise_dim());
    if domain.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "domain dimension {} but coefficient state dimension {d}",
            domain.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = Workspace::new(d, r);
    let mut plus = vec![0.0; d * r];
    let mut minus = vec![0.0; d * r];
    let mut worst: f64 = 0.0;
    for _ in 0..CHECK_POINTS {
        let x = domain.sample_point(&mut rng);
        coeffs.sigma(&x, &mut ws.sigma);
        coeffs.drift(&x, &mut ws.drift);
        coeffs.dsigma(&x, &mut ws.dsigma);
        if ws.sigma.iter().chain(&ws.drift).chain(&ws.dsigma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCoefficients(format!("non-finite value at {x:?}")));
        }
        for a in 0..d {
            let h = 1e-6 * (1.0 + x[a].abs());
            let mut xp = x.clone();
            xp[a] += h;
            let mut xm = x.clone();
            xm[a] -= h;
            coeffs.sigma(&xp, &mut plus);
            coeffs.sigma(&xm, &mut minus);
            for lj in 0..d * r {
                let fd = (plus[lj] - minus[lj]) / (2.0 * h);
                let exact = ws.dsigma[lj * d + a];
                worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    if worst >= DSIGMA_REL_TOL {
        return Err(Error::InvalidCoefficients(format!(
            "dsigma disagrees with finite differences of sigma (relative error {worst:e})"
        )));
    }
    Ok(worst)
}
