use super::brownian::BrownianPath;
use super::interp::{Interpolant, Kernel};
use crate::domain::{NodePosition, TimeGrid};
use crate::error::{Error, Result};

/// The approximation family, independent of the mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum DriverKind {
    /// Window-wise interpolation `w(t_δ) + f((t - t_δ)/δ)·Δw`. One interpolant is
    /// broadcast to every component; otherwise there must be one per component.
    PiecewiseLinear { interpolants: Vec<Interpolant> },
    /// `∫₀^δ w(t + s) ρ_δ(s) ds` by the midpoint rule with `quad_points` cells
    /// (default: one cell per fine step).
    Mollifier {
        kernel: Kernel,
        quad_points: Option<usize>,
    },
    /// Two-dimensional interpolation that swaps `f1`/`f2` when the window
    /// increments have opposite signs.
    McShane { f1: Interpolant, f2: Interpolant },
}

impl DriverKind {
    pub fn piecewise_linear(f: Interpolant) -> Self {
        Self::PiecewiseLinear {
            interpolants: vec![f],
        }
    }

    pub fn mollifier(kernel: Kernel) -> Self {
        Self::Mollifier {
            kernel,
            quad_points: None,
        }
    }

    pub fn mcshane(f1: Interpolant, f2: Interpolant) -> Self {
        Self::McShane { f1, f2 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::PiecewiseLinear { .. } => "piecewise-linear",
            Self::Mollifier { .. } => "mollifier",
            Self::McShane { .. } => "mcshane",
        }
    }

    /// Noise dimension forced by the family, if any.
    pub fn required_r(&self) -> Option<usize> {
        match self {
            Self::McShane { .. } => Some(2),
            _ => None,
        }
    }

    pub(crate) fn check_r(&self, r: usize) -> Result<()> {
        if r == 0 {
            return Err(Error::InvalidDriver("noise dimension must be at least 1".into()));
        }
        match self {
            Self::McShane { .. } if r != 2 => Err(Error::InvalidDriver(format!(
                "the McShane driver needs r = 2, got r = {r}"
            ))),
            Self::PiecewiseLinear { interpolants }
                if interpolants.len() != 1 && interpolants.len() != r =>
            {
                Err(Error::InvalidDriver(format!(
                    "{} interpolants for r = {r}; give one or one per component",
                    interpolants.len()
                )))
            }
            Self::PiecewiseLinear { interpolants } if interpolants.is_empty() => {
                Err(Error::InvalidDriver("no interpolant given".into()))
            }
            _ => Ok(()),
        }
    }
}

// Midpoint nodes of the mollifier quadrature, stored as node offsets from t.
#[derive(Debug, Clone)]
struct Quadrature {
    offsets: Vec<(usize, f64)>,
    weights: Vec<f64>,
    dweights: Vec<f64>,
}

impl Quadrature {
    fn new(kernel: &Kernel, substeps: usize, cells: usize) -> Self {
        let mut offsets = Vec::with_capacity(cells);
        let mut weights = Vec::with_capacity(cells);
        let mut dweights = Vec::with_capacity(cells);
        for q in 0..cells {
            let xi = (q as f64 + 0.5) / cells as f64;
            let pos = (q as f64 + 0.5) * substeps as f64 / cells as f64;
            let whole = pos.floor();
            offsets.push((whole as usize, pos - whole));
            weights.push(kernel.eval(xi) / cells as f64);
            dweights.push(kernel.deriv(xi) / cells as f64);
        }
        // Unit mass and zero-mass derivative make the discrete G commute with path shifts.
        let mass: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|a| *a /= mass);
        let dmean = dweights.iter().sum::<f64>() / cells as f64;
        dweights.iter_mut().for_each(|b| *b -= dmean);
        Self {
            offsets,
            weights,
            dweights,
        }
    }
}

/// A driver family bound to a mesh `δ` and a fine step `dt` dividing it.
#[derive(Debug, Clone)]
pub struct ApproxDriver {
    kind: DriverKind,
    delta: f64,
    dt: f64,
    r: usize,
    substeps: usize,
    quad: Option<Quadrature>,
}

impl ApproxDriver {
    pub fn new(kind: DriverKind, delta: f64, dt: f64, r: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidDriver(format!("delta must be positive, got {delta}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidDriver(format!("dt must be positive, got {dt}")));
        }
        let ratio = delta / dt;
        let substeps = ratio.round();
        if substeps < 1.0 || (ratio - substeps).abs() > 1e-9 * substeps {
            return Err(Error::InvalidDriver(format!(
                "delta = {delta} is not an integer multiple of dt = {dt}"
            )));
        }
        let substeps = substeps as usize;
        kind.check_r(r)?;
        let quad = match &kind {
            DriverKind::Mollifier {
                kernel,
                quad_points,
            } => {
                let cells = quad_points.unwrap_or(substeps);
                if cells == 0 {
                    return Err(Error::InvalidDriver("quad_points must be positive".into()));
                }
                Some(Quadrature::new(kernel, substeps, cells))
            }
            _ => None,
        };
        Ok(Self {
            kind,
            delta,
            dt,
            r,
            substeps,
            quad,
        })
    }

    pub fn on_grid(kind: DriverKind, delta: f64, grid: &TimeGrid, r: usize) -> Result<Self> {
        Self::new(kind, delta, grid.dt(), r)
    }

    pub fn kind(&self) -> &DriverKind {
        &self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Fine steps per mesh window.
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn quad_points(&self) -> Option<usize> {
        self.quad.as_ref().map(|q| q.weights.len())
    }

    pub(crate) fn check_path(&self, w: &BrownianPath) -> Result<()> {
        if w.r() != self.r {
            return Err(Error::DimensionMismatch(format!(
                "driver has r = {}, path has r = {}",
                self.r,
                w.r()
            )));
        }
        let dt = w.grid().dt();
        if (dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::GridMismatch(format!(
                "driver expects dt = {}, path has dt = {dt}",
                self.dt
            )));
        }
        Ok(())
    }

    /// Whether `G` at `pos` only reads nodes of a path with `n` steps.
    fn g_defined_at(&self, pos: NodePosition, n: usize) -> bool {
        let m = self.substeps;
        match self.kind {
            DriverKind::Mollifier { .. } => {
                pos.node + m < n || (pos.node + m == n && pos.is_node())
            }
            _ => {
                if pos.node > n || (pos.node == n && !pos.is_node()) {
                    return false;
                }
                let rem = pos.node % m;
                rem == 0 && pos.is_node() || (pos.node / m + 1) * m <= n
            }
        }
    }

    fn position_for_g(&self, w: &BrownianPath, t: f64) -> Result<NodePosition> {
        self.check_path(w)?;
        let grid = w.grid();
        let pos = grid.position(t)?;
        if !self.g_defined_at(pos, grid.n_fine()) {
            let hi = match self.kind {
                DriverKind::Mollifier { .. } => grid.horizon() - self.delta,
                _ => grid.horizon(),
            };
            return Err(Error::TimeOutOfRange { t, lo: 0.0, hi });
        }
        Ok(pos)
    }

    /// `G^δ(t, w)`.
    pub fn eval_g(&self, w: &BrownianPath, t: f64) -> Result<Vec<f64>> {
        let pos = self.position_for_g(w, t)?;
        let mut out = vec![0.0; self.r];
        self.g_at(w, pos, &mut out);
        Ok(out)
    }

    /// `d/dt G^δ(t, w)`; right derivative at window boundaries.
    pub fn eval_g_dot(&self, w: &BrownianPath, t: f64) -> Result<Vec<f64>> {
        let pos = self.position_for_g(w, t)?;
        let mut out = vec![0.0; self.r];
        self.g_dot_at(w, pos, &mut out);
        Ok(out)
    }

    /// Shifted driver `B^δ(t) = G^δ(t - δ)` for `t >= δ`, zero before.
    pub fn eval_b_shifted(&self, w: &BrownianPath, t: f64) -> Result<Vec<f64>> {
        self.check_path(w)?;
        let pos = w.grid().position(t)?;
        let mut out = vec![0.0; self.r];
        if pos.node >= self.substeps {
            let inner = NodePosition {
                node: pos.node - self.substeps,
                frac: pos.frac,
            };
            self.g_at(w, inner, &mut out);
        }
        Ok(out)
    }

    /// `B^δ` at every node of `w`'s grid, node-major.
    pub fn b_shifted_nodes(&self, w: &BrownianPath) -> Result<Vec<f64>> {
        self.check_path(w)?;
        let n = w.grid().n_fine();
        let r = self.r;
        let mut out = vec![0.0; (n + 1) * r];
        for j in self.substeps..=n {
            let pos = NodePosition::at_node(j - self.substeps);
            self.g_at(w, pos, &mut out[j * r..(j + 1) * r]);
        }
        Ok(out)
    }

    /// Window data `(start node, end node, local coordinate u in [0, 1))` at `pos`.
    fn window(&self, pos: NodePosition) -> (usize, usize, f64) {
        let m = self.substeps;
        let start = (pos.node / m) * m;
        let u = ((pos.node - start) as f64 + pos.frac) / m as f64;
        (start, start + m, u)
    }

    fn interpolants_for(&self, w: &[f64], start: usize, end: usize, i: usize) -> &Interpolant {
        let r = self.r;
        match &self.kind {
            DriverKind::PiecewiseLinear { interpolants } => {
                &interpolants[if interpolants.len() == 1 { 0 } else { i }]
            }
            DriverKind::McShane { f1, f2 } => {
                let d1 = w[end * r] - w[start * r];
                let d2 = w[end * r + 1] - w[start * r + 1];
                // product exactly zero takes the first branch
                let same_sign = d1 * d2 >= 0.0;
                match (i, same_sign) {
                    (0, true) | (1, false) => f1,
                    _ => f2,
                }
            }
            DriverKind::Mollifier { .. } => unreachable!("mollifier has no interpolant"),
        }
    }

    pub(crate) fn g_at(&self, w: &BrownianPath, pos: NodePosition, out: &mut [f64]) {
        let r = self.r;
        let vals = w.path().values();
        match &self.quad {
            Some(quad) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (&(off, off_frac), &a) in quad.offsets.iter().zip(&quad.weights) {
                    accumulate_interp(vals, r, pos, off, off_frac, a, out);
                }
            }
            None => {
                if pos.is_node() && pos.node % self.substeps == 0 {
                    out.copy_from_slice(&vals[pos.node * r..(pos.node + 1) * r]);
                    return;
                }
                let (start, end, u) = self.window(pos);
                for (i, o) in out.iter_mut().enumerate() {
                    let f = self.interpolants_for(vals, start, end, i);
                    let a = vals[start * r + i];
                    let b = vals[end * r + i];
                    *o = a + f.eval(u) * (b - a);
                }
            }
        }
    }

    pub(crate) fn g_dot_at(&self, w: &BrownianPath, pos: NodePosition, out: &mut [f64]) {
        let r = self.r;
        let vals = w.path().values();
        match &self.quad {
            Some(quad) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (&(off, off_frac), &b) in quad.offsets.iter().zip(&quad.dweights) {
                    accumulate_interp(vals, r, pos, off, off_frac, b, out);
                }
                let scale = -1.0 / self.delta;
                out.iter_mut().for_each(|o| *o *= scale);
            }
            None => {
                let n = w.grid().n_fine();
                let (mut start, mut end, mut u) = self.window(pos);
                if end > n {
                    // right end of the path: use the last window's left derivative
                    end = start;
                    start -= self.substeps;
                    u = 1.0;
                }
                for (i, o) in out.iter_mut().enumerate() {
                    let f = self.interpolants_for(vals, start, end, i);
                    let a = vals[start * r + i];
                    let b = vals[end * r + i];
                    *o = f.deriv(u) * (b - a) / self.delta;
                }
            }
        }
    }
}

#[inline]
fn accumulate_interp(
    vals: &[f64],
    r: usize,
    pos: NodePosition,
    off: usize,
    off_frac: f64,
    weight: f64,
    out: &mut [f64],
) {
    let mut frac = pos.frac + off_frac;
    let mut idx = pos.node + off;
    if frac >= 1.0 {
        frac -= 1.0;
        idx += 1;
    }
    let a = &vals[idx * r..(idx + 1) * r];
    if frac == 0.0 {
        for (o, &x) in out.iter_mut().zip(a) {
            *o += weight * x;
        }
    } else {
        let b = &vals[(idx + 1) * r..(idx + 2) * r];
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o += weight * (x + frac * (y - x));
        }
    }
}
