use crate::error::{Error, Result};

/// Snap distance, in node units, below which a time is treated as lying on a node.
const NODE_SNAP: f64 = 1e-9;

/// Uniform partition of `[0, horizon]` into `n_fine` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_fine: usize,
}

/// A point on a grid expressed as a node index plus a fractional offset in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePosition {
    pub node: usize,
    pub frac: f64,
}

impl NodePosition {
    pub fn at_node(node: usize) -> Self {
        Self { node, frac: 0.0 }
    }

    pub fn is_node(&self) -> bool {
        self.frac == 0.0
    }
}

impl TimeGrid {
    pub fn new(horizon: f64, n_fine: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if n_fine == 0 {
            return Err(Error::InvalidArgument("n_fine must be at least 1".into()));
        }
        Ok(Self { horizon, n_fine })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn n_nodes(&self) -> usize {
        self.n_fine + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_fine as f64
    }

    /// Time of node `k`, computed as `k·T/n` so that no rounding accumulates.
    pub fn time(&self, k: usize) -> f64 {
        (k as f64 * self.horizon) / self.n_fine as f64
    }

    /// Locates `t` on the grid. Times within `1e-9` node widths of a node snap to it.
    pub fn position(&self, t: f64) -> Result<NodePosition> {
        let p = t * self.n_fine as f64 / self.horizon;
        let n = self.n_fine as f64;
        if !p.is_finite() || p < -NODE_SNAP || p > n + NODE_SNAP {
            return Err(Error::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.horizon,
            });
        }
        let p = p.clamp(0.0, n);
        let rounded = p.round();
        if (p - rounded).abs() < NODE_SNAP {
            return Ok(NodePosition::at_node(rounded as usize));
        }
        let node = p.floor();
        Ok(NodePosition {
            node: node as usize,
            frac: p - node,
        })
    }

    /// Node index of `t`, which must lie on the grid.
    pub fn node_of(&self, t: f64) -> Result<usize> {
        let pos = self.position(t)?;
        if !pos.is_node() {
            return Err(Error::InvalidArgument(format!(
                "time {t} is not a node of the grid with dt = {}",
                self.dt()
            )));
        }
        Ok(pos.node)
    }

    /// Number of fine steps in `span`, which must be a positive integer multiple of `dt`.
    pub fn steps_in(&self, span: f64) -> Result<usize> {
        let m = span / self.dt();
        let rounded = m.round();
        if !(m.is_finite() && rounded >= 1.0 && (m - rounded).abs() < 1e-9 * rounded.max(1.0)) {
            return Err(Error::InvalidArgument(format!(
                "{span} is not a positive integer multiple of dt = {}",
                self.dt()
            )));
        }
        Ok(rounded as usize)
    }
}

/// Vector-valued path stored on a uniform grid, linear between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl SampledPath {
    /// `values` is node-major: node `k` occupies `values[k*dim..(k+1)*dim]`.
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("path dimension must be positive".into()));
        }
        if values.len() != grid.n_nodes() * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values ({} nodes x {dim}), got {}",
                grid.n_nodes() * dim,
                grid.n_nodes(),
                values.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![0.0; grid.n_nodes() * dim],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: TimeGrid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut path = Self::zeros(grid, dim);
        for k in 0..grid.n_nodes() {
            let t = grid.time(k);
            f(t, path.node_mut(k));
        }
        path
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Component `i` at node `k`.
    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.dim + i]
    }

    pub fn eval_at(&self, pos: NodePosition, out: &mut [f64]) {
        let a = self.node(pos.node);
        if pos.frac == 0.0 {
            out.copy_from_slice(a);
            return;
        }
        let b = self.node(pos.node + 1);
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = x + pos.frac * (y - x);
        }
    }

    /// Linear interpolation between nodes; times outside `[0, T]` are rejected.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let pos = self.grid.position(t)?;
        let mut out = vec![0.0; self.dim];
        self.eval_at(pos, &mut out);
        Ok(out)
    }

    /// Total variation between nodes `i <= j`.
    pub fn total_variation_nodes(&self, i: usize, j: usize) -> f64 {
        (i..j).map(|k| self.increment_norm(k)).sum()
    }

    /// Running total variation `|p|_0^{t_k}` at every node.
    pub fn running_total_variation(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_nodes());
        let mut acc = 0.0;
        out.push(acc);
        for k in 0..self.grid.n_fine() {
            acc += self.increment_norm(k);
            out.push(acc);
        }
        out
    }

    fn increment_norm(&self, k: usize) -> f64 {
        distance(self.node(k), self.node(k + 1))
    }

    /// Largest Euclidean distance between corresponding nodes of two paths on the same grid.
    pub fn sup_distance(&self, other: &SampledPath) -> Result<f64> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::GridMismatch(
                "paths must share grid and dimension".into(),
            ));
        }
        Ok((0..self.n_nodes())
            .map(|k| distance(self.node(k), other.node(k)))
            .fold(0.0, f64::max))
    }
}

/// Total variation `|p|_s^t` of a piecewise-linear path, exact between nodes.
pub fn total_variation(path: &SampledPath, s: f64, t: f64) -> Result<f64> {
    if s > t {
        return Err(Error::InvalidArgument(format!("invalid range: s = {s} > t = {t}")));
    }
    let ps = path.grid.position(s)?;
    let pt = path.grid.position(t)?;
    let dim = path.dim;
    let mut start = vec![0.0; dim];
    let mut end = vec![0.0; dim];
    path.eval_at(ps, &mut start);
    path.eval_at(pt, &mut end);

    if ps.node == pt.node {
        return Ok(distance(&start, &end));
    }
    // first node strictly after s up to the last node at or before t
    let first = ps.node + 1;
    let last = pt.node;
    let mut tv = distance(&start, path.node(first));
    tv += path.total_variation_nodes(first, last);
    tv += distance(path.node(last), &end);
    Ok(tv)
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
