use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{SampledPath, TimeGrid};
use crate::error::{Error, Result};

/// Identifies the bit stream behind [`sample_brownian`]; bump it if the sampler changes.
pub const GENERATOR_ID: &str = "chacha8/ziggurat-normal/v1";

/// An `r`-dimensional Brownian path on a fine grid, `W(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    path: SampledPath,
    seed: Option<u64>,
    generator_id: String,
}

/// Draws `W` with independent `N(0, dt)` increments per component.
pub fn sample_brownian(grid: TimeGrid, r: usize, seed: u64) -> Result<BrownianPath> {
    if r == 0 {
        return Err(Error::InvalidArgument("noise dimension r must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.n_nodes() * r);
    let mut current = vec![0.0; r];
    values.extend_from_slice(&current);
    for _ in 1..grid.n_nodes() {
        for c in current.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *c += sd * z;
        }
        values.extend_from_slice(&current);
    }
    Ok(BrownianPath {
        path: SampledPath::new(grid, r, values)?,
        seed: Some(seed),
        generator_id: GENERATOR_ID.to_string(),
    })
}

impl BrownianPath {
    /// Wraps a deterministic path, e.g. a straight line for testing. `path(0)` must be zero.
    pub fn from_path(path: SampledPath) -> Result<Self> {
        if path.node(0).iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument("a Brownian path must start at 0".into()));
        }
        Ok(Self {
            path,
            seed: None,
            generator_id: "explicit".to_string(),
        })
    }

    pub fn zero(grid: TimeGrid, r: usize) -> Self {
        Self {
            path: SampledPath::zeros(grid, r),
            seed: None,
            generator_id: "zero".to_string(),
        }
    }

    pub fn path(&self) -> &SampledPath {
        &self.path
    }

    pub fn grid(&self) -> &TimeGrid {
        self.path.grid()
    }

    pub fn r(&self) -> usize {
        self.path.dim()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn generator_id(&self) -> &str {
        &self.generator_id
    }

    /// Component `i` at node `k`.
    #[inline]
    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.path.at(k, i)
    }

    /// `(θ_s w)(u) = w(s + u) - w(s)` with `s` the time of node `k`.
    pub fn shifted(&self, k: usize) -> Result<Self> {
        let grid = self.grid();
        if k >= grid.n_fine() {
            return Err(Error::InvalidArgument(format!(
                "shift by {k} nodes leaves no path on a grid of {} steps",
                grid.n_fine()
            )));
        }
        let n = grid.n_fine() - k;
        let new_grid = TimeGrid::new(n as f64 * grid.dt(), n)?;
        let r = self.r();
        let base = self.path.node(k);
        let mut values = Vec::with_capacity((n + 1) * r);
        for j in 0..=n {
            for (i, &b) in base.iter().enumerate() {
                values.push(self.at(k + j, i) - b);
            }
        }
        Ok(Self {
            path: SampledPath::new(new_grid, r, values)?,
            seed: self.seed,
            generator_id: self.generator_id.clone(),
        })
    }

    /// Keeps every `factor`-th node.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        let grid = self.grid();
        if factor == 0 || grid.n_fine() % factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {} steps by {factor}",
                grid.n_fine()
            )));
        }
        let new_grid = TimeGrid::new(grid.horizon(), grid.n_fine() / factor)?;
        let values = (0..new_grid.n_nodes())
            .flat_map(|j| self.path.node(j * factor).to_vec())
            .collect();
        Ok(Self {
            path: SampledPath::new(new_grid, self.r(), values)?,
            seed: self.seed,
            generator_id: self.generator_id.clone(),
        })
    }
}
