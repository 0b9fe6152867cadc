use rayon::prelude::*;
use serde::Serialize;

use super::approx::{ApproxDriver, DriverKind};
use super::brownian::{sample_brownian, BrownianPath};
use super::quad::adaptive_simpson;
use crate::domain::{NodePosition, TimeGrid};
use crate::error::{Error, Result};
use crate::mc::{column_estimates, derive_seed, MeanEstimate};

/// Fine steps per mesh window used by the estimators unless overridden.
pub const DEFAULT_SUBSTEPS: usize = 16;
/// Smallest Monte Carlo sample accepted for Brownian estimates.
pub const MIN_SAMPLES: usize = 100;

/// Where an estimator gets its paths from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSource {
    /// Fresh independent Brownian path per sample, seeded from `(seed, sample index)`.
    Brownian { seed: u64 },
    /// The identically zero path; a degenerate input for sanity checks.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Limit,
    MonteCarlo { n_samples: usize, stderr: Vec<f64> },
}

/// `c = s + I/2` with skew-symmetric `s`, row-major `r × r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionMatrix {
    pub r: usize,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub provenance: Provenance,
}

impl CorrectionMatrix {
    fn from_skew(r: usize, s: Vec<f64>, provenance: Provenance) -> Self {
        let mut c = s.clone();
        for i in 0..r {
            c[i * r + i] += 0.5;
        }
        Self { r, c, s, provenance }
    }

    /// `s = 0`, `c = I/2`.
    pub fn symmetric(r: usize) -> Self {
        Self::from_skew(r, vec![0.0; r * r], Provenance::Limit)
    }

    /// Limit matrix with the given upper-triangular skew entries `s_ij`, `i < j`.
    pub fn with_skew(r: usize, upper: &[(usize, usize, f64)]) -> Result<Self> {
        let mut s = vec![0.0; r * r];
        for &(i, j, v) in upper {
            if i >= j || j >= r {
                return Err(Error::InvalidArgument(format!(
                    "skew entry ({i}, {j}) must satisfy i < j < {r}"
                )));
            }
            s[i * r + j] = v;
            s[j * r + i] = -v;
        }
        Ok(Self::from_skew(r, s, Provenance::Limit))
    }

    /// The all-zero matrix; not of the form `s + I/2`, used to switch the drift correction off.
    pub fn zero(r: usize) -> Self {
        Self {
            r,
            c: vec![0.0; r * r],
            s: vec![0.0; r * r],
            provenance: Provenance::Limit,
        }
    }

    pub fn c(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.r + j]
    }

    pub fn s(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.r + j]
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        match &self.provenance {
            Provenance::MonteCarlo { stderr, .. } => Some(stderr),
            Provenance::Limit => None,
        }
    }
}

/// Entry-wise Monte Carlo estimate of an `r × r` matrix statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixEstimate {
    pub r: usize,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

impl MatrixEstimate {
    fn from_columns(r: usize, cols: &[MeanEstimate], n_samples: usize) -> Self {
        Self {
            r,
            mean: cols.iter().map(|e| e.mean).collect(),
            stderr: cols.iter().map(|e| e.stderr).collect(),
            n_samples,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> MeanEstimate {
        MeanEstimate {
            mean: self.mean[i * self.r + j],
            stderr: self.stderr[i * self.r + j],
            n: self.n_samples,
        }
    }
}

/// Per-path integrands of `s`, `c` and `c*`, each `r × r` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStatistics {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
    pub c_star: Vec<f64>,
}

impl PathStatistics {
    /// Integrals over `[0, t]`, `t` the time of node `t_node`, by the midpoint rule on the fine grid:
    ///
    /// * `s_ij  = 1/(2t) ∫₀ᵗ G^i Ġ^j - G^j Ġ^i ds`
    /// * `c_ij  = 1/t    ∫₀ᵗ Ġ^i (G^j(t) - G^j(s)) ds`
    /// * `c*_ij = 1/δ    ∫₀^δ Ġ^i (G^j(t) - G^j(s)) ds`
    pub fn compute(driver: &ApproxDriver, w: &BrownianPath, t_node: usize) -> Result<Self> {
        driver.check_path(w)?;
        let m = driver.substeps();
        if t_node < m {
            return Err(Error::InvalidArgument(format!(
                "t must be at least delta ({m} fine steps), got {t_node} steps"
            )));
        }
        let t_probe = w.grid().time(t_node);
        // G must be defined at t itself
        driver.eval_g(w, t_probe)?;
        let r = driver.r();
        let dt = w.grid().dt();
        let t = t_node as f64 * dt;
        let delta = m as f64 * dt;

        let mut g_end = vec![0.0; r];
        driver.g_at(w, NodePosition::at_node(t_node), &mut g_end);

        let mut g = vec![0.0; r];
        let mut gd = vec![0.0; r];
        let mut area = vec![0.0; r * r];
        let mut c_int = vec![0.0; r * r];
        let mut c_star_int = vec![0.0; r * r];
        for j in 0..t_node {
            let mid = NodePosition { node: j, frac: 0.5 };
            driver.g_at(w, mid, &mut g);
            driver.g_dot_at(w, mid, &mut gd);
            for a in 0..r {
                for b in 0..r {
                    let v = gd[a] * (g_end[b] - g[b]) * dt;
                    c_int[a * r + b] += v;
                    if j < m {
                        c_star_int[a * r + b] += v;
                    }
                }
                for b in (a + 1)..r {
                    area[a * r + b] += (g[a] * gd[b] - g[b] * gd[a]) * dt;
                }
            }
        }
        let mut s = vec![0.0; r * r];
        for a in 0..r {
            for b in (a + 1)..r {
                let v = area[a * r + b] / (2.0 * t);
                s[a * r + b] = v;
                s[b * r + a] = -v;
            }
        }
        Ok(Self {
            s,
            c: c_int.iter().map(|v| v / t).collect(),
            c_star: c_star_int.iter().map(|v| v / delta).collect(),
        })
    }
}

/// Driver family, noise dimension, mesh and fine resolution for the estimators.
#[derive(Debug, Clone)]
pub struct StatsSetup {
    pub kind: DriverKind,
    pub r: usize,
    pub delta: f64,
    pub substeps: usize,
}

impl StatsSetup {
    pub fn new(kind: DriverKind, r: usize, delta: f64) -> Self {
        Self {
            kind,
            r,
            delta,
            substeps: DEFAULT_SUBSTEPS,
        }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    fn dt(&self) -> f64 {
        self.delta / self.substeps as f64
    }

    /// Driver plus grid covering `[0, t + δ]`, and the node index of `t`.
    fn prepare(&self, t: f64) -> Result<(ApproxDriver, TimeGrid, usize)> {
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be positive".into()));
        }
        let driver = ApproxDriver::new(self.kind.clone(), self.delta, self.dt(), self.r)?;
        let dt = self.dt();
        let ratio = t / dt;
        let t_node = ratio.round();
        if !(t_node >= self.substeps as f64 && (ratio - t_node).abs() < 1e-9 * t_node) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} must be at least delta = {} and a multiple of dt = {dt}",
                self.delta
            )));
        }
        let t_node = t_node as usize;
        let n = t_node + self.substeps;
        let grid = TimeGrid::new(n as f64 * dt, n)?;
        Ok((driver, grid, t_node))
    }
}

/// Monte Carlo estimates of `s(t, δ)`, `c(t, δ)` and `c*(t, δ)` from the same paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticsEstimate {
    pub t: f64,
    pub delta: f64,
    pub s: MatrixEstimate,
    pub c: MatrixEstimate,
    pub c_star: MatrixEstimate,
}

fn check_samples(n_samples: usize, source: PathSource) -> Result<()> {
    match source {
        PathSource::Brownian { .. } if n_samples < MIN_SAMPLES => Err(Error::InvalidArgument(
            format!("need at least {MIN_SAMPLES} samples, got {n_samples}"),
        )),
        PathSource::Zero if n_samples == 0 => {
            Err(Error::InvalidArgument("need at least one sample".into()))
        }
        _ => Ok(()),
    }
}

pub fn estimate_statistics(
    setup: &StatsSetup,
    t: f64,
    n_samples: usize,
    source: PathSource,
) -> Result<StatisticsEstimate> {
    check_samples(n_samples, source)?;
    let (driver, grid, t_node) = setup.prepare(t)?;
    let r = setup.r;
    let width = 3 * r * r;
    let rows: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let w = match source {
                PathSource::Brownian { seed } => {
                    sample_brownian(grid, r, derive_seed(seed, &[k as u64]))?
                }
                PathSource::Zero => BrownianPath::zero(grid, r),
            };
            let st = PathStatistics::compute(&driver, &w, t_node)?;
            let mut row = st.s;
            row.extend(st.c);
            row.extend(st.c_star);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    debug_assert_eq!(flat.len(), width * n_samples);
    let cols = column_estimates(&flat, width);
    let rr = r * r;
    Ok(StatisticsEstimate {
        t: grid.time(t_node),
        delta: setup.delta,
        s: MatrixEstimate::from_columns(r, &cols[..rr], n_samples),
        c: MatrixEstimate::from_columns(r, &cols[rr..2 * rr], n_samples),
        c_star: MatrixEstimate::from_columns(r, &cols[2 * rr..], n_samples),
    })
}

/// `ŝ(t, δ)` packaged as the plug-in correction `ĉ = ŝ + I/2`.
pub fn estimate_s(
    setup: &StatsSetup,
    t: f64,
    n_samples: usize,
    source: PathSource,
) -> Result<CorrectionMatrix> {
    let est = estimate_statistics(setup, t, n_samples, source)?;
    let r = setup.r;
    let mut s = est.s.mean.clone();
    // the per-path integrand is antisymmetric; re-impose it on the mean bit-exactly
    for i in 0..r {
        s[i * r + i] = 0.0;
        for j in (i + 1)..r {
            s[j * r + i] = -s[i * r + j];
        }
    }
    Ok(CorrectionMatrix::from_skew(
        r,
        s,
        Provenance::MonteCarlo {
            n_samples,
            stderr: est.s.stderr,
        },
    ))
}

pub fn estimate_c(
    setup: &StatsSetup,
    t: f64,
    n_samples: usize,
    source: PathSource,
) -> Result<MatrixEstimate> {
    Ok(estimate_statistics(setup, t, n_samples, source)?.c)
}

pub fn estimate_c_star(
    setup: &StatsSetup,
    t: f64,
    n_samples: usize,
    source: PathSource,
) -> Result<MatrixEstimate> {
    Ok(estimate_statistics(setup, t, n_samples, source)?.c_star)
}

/// Limit `c = s + I/2` of the driver statistics.
///
/// Piecewise-linear and mollifier drivers have `s = 0`. The McShane driver has
/// `s₁₂ = -s₂₁ = (1 - 2∫₀¹ ḟ¹ f² ds)/π`.
pub fn limit_correction(kind: &DriverKind, r: usize) -> Result<CorrectionMatrix> {
    kind.check_r(r)?;
    match kind {
        DriverKind::PiecewiseLinear { .. } | DriverKind::Mollifier { .. } => {
            Ok(CorrectionMatrix::symmetric(r))
        }
        DriverKind::McShane { f1, f2 } => {
            let cross = adaptive_simpson(&|u| f1.deriv(u) * f2.eval(u), 0.0, 1.0, 1e-12);
            let s12 = (1.0 - 2.0 * cross) / std::f64::consts::PI;
            CorrectionMatrix::with_skew(2, &[(0, 1, s12)])
        }
    }
}

/// One row of the `E|G^δ(0)|^{2p}` scaling table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub delta: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `estimate / δ^p`
    pub ratio: f64,
}

/// Monte Carlo `E|G^{δ,1}(0)|^{2p}` per mesh, for the bound `<= C_p δ^p`.
pub fn scaling_check(
    kind: &DriverKind,
    p: u32,
    deltas: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if !(p == 1 || p == 2) {
        return Err(Error::InvalidArgument(format!("p must be 1 or 2, got {p}")));
    }
    let r = kind.required_r().unwrap_or(1);
    deltas
        .iter()
        .enumerate()
        .map(|(di, &delta)| {
            let setup = StatsSetup::new(kind.clone(), r, delta);
            let (driver, grid, _) = setup.prepare(delta)?;
            let samples: Vec<f64> = (0..n_samples)
                .into_par_iter()
                .map(|k| {
                    let w = sample_brownian(grid, r, derive_seed(seed, &[di as u64, k as u64]))?;
                    let mut g = vec![0.0; r];
                    driver.g_at(&w, NodePosition::at_node(0), &mut g);
                    Ok(g[0].powi(2 * p as i32))
                })
                .collect::<Result<_>>()?;
            let est = MeanEstimate::from_samples(&samples);
            Ok(ScalingRow {
                delta,
                estimate: est.mean,
                stderr: est.stderr,
                ratio: est.mean / delta.powi(p as i32),
            })
        })
        .collect()
}
