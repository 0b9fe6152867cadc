use super::path::SampledPath;
use super::shape::{DomainShape, TAU_PROJ};
use crate::error::{Error, Result};

/// Solution `(x, k)` of the Skorohod problem on a grid, with `|k|_0^t` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedPair {
    pub x: SampledPath,
    pub k: SampledPath,
    pub k_tv: Vec<f64>,
}

impl ReflectedPair {
    /// Largest `|x - h - k|` over the nodes; zero for every pair built here.
    pub fn decomposition_residual(&self, h: &SampledPath) -> f64 {
        let mut worst: f64 = 0.0;
        for ((x, h), k) in self.x.values().iter().zip(h.values()).zip(self.k.values()) {
            worst = worst.max((x - (h + k)).abs());
        }
        worst
    }
}

/// Explicit map on `[origin, ∞)`: `k(t) = max(0, sup_{s<=t}(origin - h(s)))`.
pub fn skorohod_halfline(h: &SampledPath, origin: f64) -> Result<ReflectedPair> {
    if h.dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "half-line reflection needs a 1-d path, got dim {}",
            h.dim()
        )));
    }
    let h0 = h.at(0, 0);
    if h0 < origin {
        return Err(Error::StartOutsideDomain(format!(
            "h(0) = {h0} is below the origin {origin}"
        )));
    }
    let grid = *h.grid();
    let mut x = Vec::with_capacity(grid.n_nodes());
    let mut k = Vec::with_capacity(grid.n_nodes());
    let mut running = 0.0f64;
    for &hv in h.values() {
        running = running.max(origin - hv);
        k.push(running);
        x.push(hv + running);
    }
    let k_tv = k.clone();
    Ok(ReflectedPair {
        x: SampledPath::new(grid, 1, x)?,
        k: SampledPath::new(grid, 1, k)?,
        k_tv,
    })
}

/// Two-sided reflection on `[a, b]` via the per-step clamp recursion.
pub fn skorohod_interval(h: &SampledPath, a: f64, b: f64) -> Result<ReflectedPair> {
    let domain = DomainShape::interval(a, b)?;
    if h.dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "interval reflection needs a 1-d path, got dim {}",
            h.dim()
        )));
    }
    skorohod_projected(&domain, h)
}

/// Projection scheme for any convex domain:
/// `x_{j+1} = P(x_j + Δh_j)`, with `k` accumulating the projection corrections.
///
/// `k` is the primary state and `x` is stored as `h + k`, so the decomposition
/// holds bit-exactly at every node.
pub fn skorohod_projected(domain: &DomainShape, h: &SampledPath) -> Result<ReflectedPair> {
    let d = domain.dim();
    if h.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "path dimension {} does not match domain dimension {d}",
            h.dim()
        )));
    }
    if !domain.contains(h.node(0), TAU_PROJ) {
        return Err(Error::StartOutsideDomain(format!(
            "h(0) = {:?} is outside the domain closure",
            h.node(0)
        )));
    }
    let grid = *h.grid();
    let n = grid.n_nodes();
    let hv = h.values();
    let mut x = vec![0.0; n * d];
    let mut k = vec![0.0; n * d];
    let mut k_tv = Vec::with_capacity(n);
    x[..d].copy_from_slice(&hv[..d]);
    k_tv.push(0.0);

    let mut y = vec![0.0; d];
    let mut projected = vec![0.0; d];
    let mut tv = 0.0;
    for j in 1..n {
        let (cur, prev) = (j * d, (j - 1) * d);
        // x_{j-1} + Δh = h_j + k_{j-1}
        for i in 0..d {
            y[i] = hv[cur + i] + k[prev + i];
        }
        projected.copy_from_slice(&y);
        domain.project_into(&mut projected)?;
        let mut step = 0.0;
        for i in 0..d {
            let dk = projected[i] - y[i];
            step += dk * dk;
            k[cur + i] = k[prev + i] + dk;
            x[cur + i] = hv[cur + i] + k[cur + i];
        }
        tv += step.sqrt();
        k_tv.push(tv);
    }
    Ok(ReflectedPair {
        x: SampledPath::new(grid, d, x)?,
        k: SampledPath::new(grid, d, k)?,
        k_tv,
    })
}
