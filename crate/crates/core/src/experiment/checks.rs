use serde::Serialize;

use crate::driver::{estimate_statistics, limit_correction, DriverKind, PathSource, StatsSetup};
use crate::error::{Error, Result};
use crate::mc::derive_seed;

/// Band width, in standard errors, used by every statistical check.
pub const BANDS: f64 = 4.0;

/// `n(δ) = ⌈δ^{-q}⌉`, reading values within rounding of an integer as that integer.
pub fn n_of_delta(delta: f64, q: f64) -> usize {
    let v = delta.powf(-q);
    let nearest = v.round();
    let n = if (v - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        v.ceil()
    };
    (n as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionRow {
    pub k: usize,
    /// `k ĉ(kδ) - ĉ*(kδ) - (k-1) ĉ((k-1)δ)`, row-major.
    pub residual: Vec<f64>,
    pub stderr: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionTable {
    pub driver: String,
    pub delta: f64,
    pub n_samples: usize,
    pub rows: Vec<RecursionRow>,
    pub pass: bool,
}

/// Checks `k c(kδ, δ) = c*(kδ, δ) + (k-1) c((k-1)δ, δ)` for `k = 2..=k_max`.
///
/// The three terms come from independent seeds, so their standard errors add in quadrature.
pub fn verify_recursion(
    kind: &DriverKind,
    r: usize,
    delta: f64,
    k_max: usize,
    n_samples: usize,
    seed: u64,
) -> Result<RecursionTable> {
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    let setup = StatsSetup::new(kind.clone(), r, delta);
    let mut rows = Vec::with_capacity(k_max - 1);
    for k in 2..=k_max {
        let kf = k as f64;
        let src = |term: u64| PathSource::Brownian {
            seed: derive_seed(seed, &[k as u64, term]),
        };
        let c_k = estimate_statistics(&setup, kf * delta, n_samples, src(0))?.c;
        let star = estimate_statistics(&setup, kf * delta, n_samples, src(1))?.c_star;
        let c_prev = estimate_statistics(&setup, (kf - 1.0) * delta, n_samples, src(2))?.c;
        let mut residual = Vec::with_capacity(r * r);
        let mut stderr = Vec::with_capacity(r * r);
        for e in 0..r * r {
            residual.push(kf * c_k.mean[e] - star.mean[e] - (kf - 1.0) * c_prev.mean[e]);
            stderr.push(
                ((kf * c_k.stderr[e]).powi(2) + star.stderr[e].powi(2) + ((kf - 1.0) * c_prev.stderr[e]).powi(2))
                    .sqrt(),
            );
        }
        let pass = residual.iter().zip(&stderr).all(|(v, s)| v.abs() <= BANDS * s);
        rows.push(RecursionRow {
            k,
            residual,
            stderr,
            pass,
        });
    }
    Ok(RecursionTable {
        driver: kind.label().to_string(),
        delta,
        n_samples,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitRow {
    pub delta: f64,
    pub k: usize,
    /// Largest `|ĉ_ij(kδ, δ) - c_ij|` over the entries.
    pub deviation: f64,
    /// Standard error of the entry attaining the maximum.
    pub stderr: f64,
    pub entry: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitTable {
    pub driver: String,
    pub q: f64,
    pub n_samples: usize,
    pub rows: Vec<LimitRow>,
    /// Deviation at the smallest δ below the one at the largest δ by more than the combined stderr.
    pub pass: bool,
}

/// Tracks `|ĉ(k(δ)δ, δ) - c|` along a schedule of meshes, with `k(δ) = ⌈δ^{-q}⌉`.
pub fn verify_prop1(
    kind: &DriverKind,
    r: usize,
    deltas: &[f64],
    q: f64,
    n_samples: usize,
    source: PathSource,
) -> Result<LimitTable> {
    if !(q > 0.0 && q < 0.2) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1/5), got {q}")));
    }
    if deltas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two meshes".into()));
    }
    let limit = limit_correction(kind, r)?;
    let mut sorted = deltas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(sorted.len());
    for (di, &delta) in sorted.iter().enumerate() {
        let k = n_of_delta(delta, q);
        let setup = StatsSetup::new(kind.clone(), r, delta);
        let src = match source {
            PathSource::Brownian { seed } => PathSource::Brownian {
                seed: derive_seed(seed, &[di as u64]),
            },
            PathSource::Zero => PathSource::Zero,
        };
        let c = estimate_statistics(&setup, k as f64 * delta, n_samples, src)?.c;
        let mut best = (0.0, 0.0, (0, 0));
        for i in 0..r {
            for j in 0..r {
                let dev = (c.mean[i * r + j] - limit.c(i, j)).abs();
                if dev > best.0 || (i, j) == (0, 0) {
                    best = (dev, c.stderr[i * r + j], (i, j));
                }
            }
        }
        rows.push(LimitRow {
            delta,
            k,
            deviation: best.0,
            stderr: best.1,
            entry: best.2,
        });
    }
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let pass = last.deviation < first.deviation - first.stderr.hypot(last.stderr);
    Ok(LimitTable {
        driver: kind.label().to_string(),
        q,
        n_samples,
        rows,
        pass,
    })
}
