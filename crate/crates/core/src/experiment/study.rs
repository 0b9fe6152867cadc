use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::n_of_delta;
use super::rate::{fit_rate, RateFit};
use crate::domain::{DomainShape, DomainSpec, TimeGrid, TAU_PROJ};
use crate::driver::{
    estimate_statistics, limit_correction, sample_brownian, ApproxDriver, CorrectionMatrix, DriverKind, DriverSpec,
    PathSource, StatsSetup, GENERATOR_ID,
};
use crate::error::{Error, Result};
use crate::mc::{column_estimates, derive_seed, MeanEstimate};
use crate::sde::{
    check_coefficients, coupled_sup_error, integrate_driven_reflected, integrate_ito_reflected, sup_error_paths,
    CoefficientSpec, Preset,
};

/// Drift correction used by the reference solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionMode {
    /// `c = s + I/2` of the driver family.
    #[default]
    Limit,
    /// `c = 0`: the reference solves the uncorrected Itô equation.
    Zero,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_q() -> f64 {
    1.0 / 6.0
}

fn default_p() -> Vec<f64> {
    vec![2.0]
}

fn default_correction_samples() -> usize {
    2000
}

fn default_name() -> String {
    "study".to_string()
}

/// Numerical parameters of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyParams {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub delta_schedule: Vec<f64>,
    /// Exponent of `n(δ) = ⌈δ^{-q}⌉`; must lie in `(0, 1/5)`.
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_p")]
    pub p_list: Vec<f64>,
    pub n_paths: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub n_fine_ref: usize,
    #[serde(default)]
    pub correction: CorrectionMode,
    /// Samples behind the `|ĉ(n(δ)δ, δ) - c|` diagnostic; 0 skips it.
    #[serde(default = "default_correction_samples")]
    pub correction_samples: usize,
    /// Estimate the reference-scheme bias by comparing against the half-resolution run.
    #[serde(default = "default_true")]
    pub proxy_bias: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub domain: DomainSpec,
    pub coefficients: CoefficientSpec,
    pub driver: DriverSpec,
    pub study: StudyParams,
}

/// Everything a study needs, resolved and validated.
pub(crate) struct ResolvedStudy {
    pub domain: DomainShape,
    pub coeffs: Preset,
    pub kind: DriverKind,
    pub correction: CorrectionMatrix,
    pub grid: TimeGrid,
    /// Schedule sorted descending.
    pub deltas: Vec<f64>,
}

impl StudyConfig {
    pub(crate) fn resolve(&self) -> Result<ResolvedStudy> {
        let s = &self.study;
        let config = |m: String| Err(Error::InvalidConfig(m));
        if !(s.q > 0.0 && s.q < 0.2) {
            return config(format!("q = {} violates 0 < q < 1/5", s.q));
        }
        if s.n_paths < 2 {
            return config(format!("n_paths must be at least 2, got {}", s.n_paths));
        }
        if s.p_list.is_empty() || s.p_list.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return config("p_list must hold positive moments".into());
        }
        if s.delta_schedule.is_empty() {
            return config("delta_schedule is empty".into());
        }
        if !(s.horizon.is_finite() && s.horizon > 0.0) || s.n_fine_ref == 0 {
            return config("horizon and n_fine_ref must be positive".into());
        }
        let grid = TimeGrid::new(s.horizon, s.n_fine_ref).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut deltas = s.delta_schedule.clone();
        for &delta in &deltas {
            if !(delta.is_finite() && delta > 0.0) {
                return config(format!("delta = {delta} must be positive"));
            }
            let windows = s.horizon / delta;
            if (windows - windows.round()).abs() > 1e-9 * windows.max(1.0) {
                return config(format!("delta = {delta} does not divide T = {}", s.horizon));
            }
            if grid.steps_in(delta).is_err() {
                return config(format!(
                    "delta = {delta} is not a multiple of the reference step {}",
                    grid.dt()
                ));
            }
        }
        deltas.sort_by(|a, b| b.total_cmp(a));
        if deltas.windows(2).any(|w| w[0] == w[1]) {
            return config("delta_schedule repeats a value".into());
        }
        let domain = self.domain.build()?;
        let coeffs = self.coefficients.build()?;
        let kind = self.driver.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let r = coeffs.r;
        kind.check_r(r).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if domain.dim() != coeffs.d || s.x0.len() != coeffs.d {
            return config(format!(
                "domain dimension {}, coefficient dimension {}, x0 length {} must agree",
                domain.dim(),
                coeffs.d,
                s.x0.len()
            ));
        }
        if !domain.contains(&s.x0, TAU_PROJ) {
            return Err(Error::StartOutsideDomain(format!("x0 = {:?}", s.x0)));
        }
        check_coefficients(&coeffs, &domain, s.base_seed)?;
        let correction = match s.correction {
            CorrectionMode::Limit => limit_correction(&kind, r)?,
            CorrectionMode::Zero => CorrectionMatrix::zero(r),
        };
        Ok(ResolvedStudy {
            domain,
            coeffs,
            kind,
            correction,
            grid,
            deltas,
        })
    }

    /// Checks every invariant without running anything.
    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub delta: f64,
    pub n_delta: usize,
    pub p: f64,
    /// Mean of `sup_t |X^δ_t - X_t|^p` over the coupled paths.
    pub error: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeRow {
    pub p: f64,
    #[serde(flatten)]
    pub fit: RateFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProxyBias {
    pub p: f64,
    /// Mean of `sup |X_ref - X_half|^p` on the half-resolution nodes.
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshDiagnostics {
    pub delta: f64,
    pub n_delta: usize,
    pub delta_tilde: f64,
    /// `max_ij |ĉ_ij(δ̃, δ) - c_ij|` against the limit of the driver family.
    pub correction_deviation: Option<f64>,
    pub correction_stderr: Option<f64>,
    /// `n^{5/2} δ^{1/2} + n^{-1}`.
    pub proof_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub proxy_bias: Vec<ProxyBias>,
    pub meshes: Vec<MeshDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub generator: String,
    pub correction: CorrectionMatrix,
    /// Sorted by δ descending, then in `p_list` order.
    pub rows: Vec<ReportRow>,
    /// One fit per moment; absent when fewer than three positive errors remain.
    pub slopes: Vec<SlopeRow>,
    pub diagnostics: Diagnostics,
}

impl ConvergenceReport {
    pub fn rows_for(&self, p: f64) -> Vec<ReportRow> {
        self.rows.iter().filter(|r| r.p == p).copied().collect()
    }

    pub fn slope_for(&self, p: f64) -> Option<RateFit> {
        self.slopes.iter().find(|s| s.p == p).map(|s| s.fit)
    }
}

/// Coupled Monte Carlo study of `E sup_t |X^δ_t - X_t|^p` over a schedule of meshes.
///
/// Path `i` at mesh index `m` (schedule sorted descending) uses the seed
/// `derive_seed(base_seed, [m, i])`. Both solutions read the same path.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let res = cfg.resolve()?;
    let s = &cfg.study;
    let r = res.coeffs.r;
    let np = s.p_list.len();

    let drivers: Vec<ApproxDriver> = res
        .deltas
        .iter()
        .map(|&d| ApproxDriver::on_grid(res.kind.clone(), d, &res.grid, r))
        .collect::<Result<_>>()?;

    let jobs = res.deltas.len() * s.n_paths;
    let samples: Vec<Vec<f64>> = (0..jobs)
        .into_par_iter()
        .map(|job| {
            let (m, i) = (job / s.n_paths, job % s.n_paths);
            let seed = derive_seed(s.base_seed, &[m as u64, i as u64]);
            let run = || -> Result<Vec<f64>> {
                let w = sample_brownian(res.grid, r, seed)?;
                let reference = integrate_ito_reflected(&res.coeffs, &res.domain, &w, &res.correction, &s.x0)?;
                let driven = integrate_driven_reflected(&res.coeffs, &res.domain, &drivers[m], &w, &s.x0)?;
                s.p_list.iter().map(|&p| coupled_sup_error(&driven, &reference, p)).collect()
            };
            run().map_err(|e| Error::StudyFailure {
                delta: res.deltas[m],
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(res.deltas.len() * np);
    for (m, &delta) in res.deltas.iter().enumerate() {
        let block: Vec<f64> = samples[m * s.n_paths..(m + 1) * s.n_paths].concat();
        let est = column_estimates(&block, np);
        for (pi, &p) in s.p_list.iter().enumerate() {
            rows.push(ReportRow {
                delta,
                n_delta: n_of_delta(delta, s.q),
                p,
                error: est[pi].mean,
                stderr: est[pi].stderr,
                n_paths: s.n_paths,
            });
        }
    }

    let mut slopes = Vec::new();
    for &p in &s.p_list {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.p == p).map(|r| (r.delta, r.error)).collect();
        match fit_rate(&pts) {
            Ok(fit) => slopes.push(SlopeRow { p, fit }),
            Err(e) => log::warn!("no slope for p = {p}: {e}"),
        }
    }

    let diagnostics = Diagnostics {
        proxy_bias: if s.proxy_bias { proxy_bias(cfg, &res)? } else { Vec::new() },
        meshes: mesh_diagnostics(cfg, &res)?,
    };

    Ok(ConvergenceReport {
        config: cfg.clone(),
        generator: GENERATOR_ID.to_string(),
        correction: res.correction.clone(),
        rows,
        slopes,
        diagnostics,
    })
}

/// Stream index for the proxy-bias paths, disjoint from the mesh indices.
const PROXY_STREAM: u64 = u64::MAX;

fn proxy_bias(cfg: &StudyConfig, res: &ResolvedStudy) -> Result<Vec<ProxyBias>> {
    let s = &cfg.study;
    if res.grid.n_fine() % 2 != 0 {
        log::warn!("odd reference grid; skipping the proxy-bias estimate");
        return Ok(Vec::new());
    }
    let r = res.coeffs.r;
    let samples: Vec<Vec<f64>> = (0..s.n_paths)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(s.base_seed, &[PROXY_STREAM, i as u64]);
            let w = sample_brownian(res.grid, r, seed)?;
            let fine = integrate_ito_reflected(&res.coeffs, &res.domain, &w, &res.correction, &s.x0)?;
            let half = w.coarsened(2)?;
            let coarse = integrate_ito_reflected(&res.coeffs, &res.domain, &half, &res.correction, &s.x0)?;
            let fine_on_coarse = crate::domain::SampledPath::new(
                *half.grid(),
                fine.x.dim(),
                (0..half.grid().n_nodes()).flat_map(|k| fine.x.node(2 * k).to_vec()).collect(),
            )?;
            s.p_list.iter().map(|&p| sup_error_paths(&fine_on_coarse, &coarse.x, p)).collect()
        })
        .collect::<Result<_>>()?;
    let est = column_estimates(&samples.concat(), s.p_list.len());
    Ok(s.p_list
        .iter()
        .zip(est)
        .map(|(&p, e)| ProxyBias {
            p,
            estimate: e.mean,
            stderr: e.stderr,
        })
        .collect())
}

fn mesh_diagnostics(cfg: &StudyConfig, res: &ResolvedStudy) -> Result<Vec<MeshDiagnostics>> {
    let s = &cfg.study;
    let r = res.coeffs.r;
    let limit = limit_correction(&res.kind, r)?;
    res.deltas
        .iter()
        .enumerate()
        .map(|(m, &delta)| {
            let n = n_of_delta(delta, s.q);
            let nf = n as f64;
            let (dev, se) = if s.correction_samples > 0 {
                let setup = StatsSetup::new(res.kind.clone(), r, delta);
                let seed = derive_seed(s.base_seed, &[PROXY_STREAM - 1, m as u64]);
                let c = estimate_statistics(&setup, nf * delta, s.correction_samples, PathSource::Brownian { seed })?.c;
                let mut best = MeanEstimate {
                    mean: -1.0,
                    stderr: 0.0,
                    n: s.correction_samples,
                };
                for i in 0..r {
                    for j in 0..r {
                        let dev = (c.mean[i * r + j] - limit.c(i, j)).abs();
                        if dev > best.mean {
                            best.mean = dev;
                            best.stderr = c.stderr[i * r + j];
                        }
                    }
                }
                (Some(best.mean), Some(best.stderr))
            } else {
                (None, None)
            };
            Ok(MeshDiagnostics {
                delta,
                n_delta: n,
                delta_tilde: nf * delta,
                correction_deviation: dev,
                correction_stderr: se,
                proof_bound: nf.powf(2.5) * delta.sqrt() + 1.0 / nf,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config(driver: DriverSpec) -> StudyConfig {
        let r = if matches!(driver, DriverSpec::Mcshane { .. }) { 2 } else { 1 };
        let mut coefficients = CoefficientSpec::named("trig");
        coefficients.r = r;
        coefficients.drift_linear = -0.5;
        StudyConfig {
            domain: DomainSpec::Interval { a: 0.0, b: 1.0 },
            coefficients,
            driver,
            study: StudyParams {
                name: "small".into(),
                horizon: 1.0,
                x0: vec![0.5],
                delta_schedule: vec![0.125, 0.0625, 0.03125],
                q: 1.0 / 6.0,
                p_list: vec![1.0, 2.0],
                n_paths: 16,
                base_seed: 7,
                n_fine_ref: 256,
                correction: CorrectionMode::Limit,
                correction_samples: 100,
                proxy_bias: true,
            },
        }
    }

    #[test]
    fn validation_messages() {
        let mut cfg = small_config(DriverSpec::piecewise_linear());
        cfg.validate().unwrap();
        cfg.study.q = 0.3;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(m)) if m.contains("1/5")));
        let mut cfg = small_config(DriverSpec::piecewise_linear());
        cfg.study.delta_schedule = vec![0.3];
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(m)) if m.contains("divide")));
        let mut cfg = small_config(DriverSpec::piecewise_linear());
        cfg.study.n_fine_ref = 100;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(DriverSpec::piecewise_linear());
        cfg.study.x0 = vec![2.0];
        assert!(cfg.validate().unwrap_err().is_domain_error());
        let mut cfg = small_config(DriverSpec::mcshane());
        cfg.coefficients.r = 1;
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn report_shape_and_determinism() {
        let cfg = small_config(DriverSpec::mollifier());
        let a = run_convergence_study(&cfg).unwrap();
        assert_eq!(a.rows.len(), 6);
        assert!(a.rows.windows(2).all(|w| w[0].delta >= w[1].delta));
        assert!(a.rows.iter().all(|r| r.stderr > 0.0 && r.n_paths == 16));
        assert_eq!(a.diagnostics.meshes.len(), 3);
        assert_eq!(a.diagnostics.proxy_bias.len(), 2);
        assert_eq!(a.slopes.len(), 2);
        let b = run_convergence_study(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_zero_drift_has_zero_error() {
        let mut cfg = small_config(DriverSpec::piecewise_linear());
        cfg.coefficients = CoefficientSpec::named("additive");
        cfg.coefficients.sigma = Some(0.0);
        let rep = run_convergence_study(&cfg).unwrap();
        assert!(rep.rows.iter().all(|r| r.error == 0.0 && r.stderr == 0.0));
        assert!(rep.slopes.is_empty());
    }
}
