use serde::Serialize;

use super::coeffs::{check_correction, corrected_drift_into, Coefficients, Workspace};
use crate::domain::{distance, DomainShape, SampledPath, TimeGrid, TAU_PROJ};
use crate::driver::{ApproxDriver, BrownianPath, CorrectionMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ItoReference,
    DrivenOde,
}

/// Reflected path `x`, its regulator `k` and `|k|_0^t` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedSolution {
    pub x: SampledPath,
    pub k: SampledPath,
    pub k_tv: Vec<f64>,
    pub scheme: Scheme,
}

impl ReflectedSolution {
    pub fn grid(&self) -> &TimeGrid {
        self.x.grid()
    }
}

fn check_inputs(coeffs: &dyn Coefficients, domain: &DomainShape, w: &BrownianPath, x0: &[f64]) -> Result<()> {
    let d = coeffs.state_dim();
    if domain.dim() != d || x0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {d}, domain dimension {}, x0 length {}",
            domain.dim(),
            x0.len()
        )));
    }
    if w.r() != coeffs.noise_dim() {
        return Err(Error::DimensionMismatch(format!(
            "noise dimension {} but the path has {} components",
            coeffs.noise_dim(),
            w.r()
        )));
    }
    if !domain.contains(x0, TAU_PROJ) {
        return Err(Error::StartOutsideDomain(format!("x0 = {x0:?}")));
    }
    Ok(())
}

/// Projected Euler loop shared by both schemes. `noise` holds `r` values per node whose
/// increments drive the equation; `coeff_step` fills `ws.sigma` and `ws.drift` at `x`.
fn projected_euler(
    domain: &DomainShape,
    grid: TimeGrid,
    d: usize,
    r: usize,
    noise: &[f64],
    x0: &[f64],
    scheme: Scheme,
    ws: &mut Workspace,
    mut coeff_step: impl FnMut(&[f64], &mut Workspace),
) -> Result<ReflectedSolution> {
    let n = grid.n_nodes();
    let dt = grid.dt();
    let mut x = Vec::with_capacity(n * d);
    let mut k = Vec::with_capacity(n * d);
    let mut k_tv = Vec::with_capacity(n);
    x.extend_from_slice(x0);
    k.resize(d, 0.0);
    k_tv.push(0.0);
    let mut y = vec![0.0; d];
    let mut xn = vec![0.0; d];
    let mut tv = 0.0;
    for (j, dn) in noise.chunks_exact(r).zip(noise.chunks_exact(r).skip(1)).enumerate() {
        let prev = j * d;
        coeff_step(&x[prev..prev + d], ws);
        for (l, yl) in y.iter_mut().enumerate() {
            let mut incr = 0.0;
            for (i, (&a, &b)) in dn.0.iter().zip(dn.1).enumerate() {
                incr += ws.sigma[l * r + i] * (b - a);
            }
            *yl = x[prev + l] + (incr + ws.drift[l] * dt);
        }
        xn.copy_from_slice(&y);
        domain.project_into(&mut xn)?;
        let mut step = 0.0;
        for l in 0..d {
            let dk = xn[l] - y[l];
            step += dk * dk;
            k.push(k[prev + l] + dk);
        }
        x.extend_from_slice(&xn);
        tv += step.sqrt();
        k_tv.push(tv);
    }
    Ok(ReflectedSolution {
        x: SampledPath::new(grid, d, x)?,
        k: SampledPath::new(grid, d, k)?,
        k_tv,
        scheme,
    })
}

/// Projected Euler–Maruyama for `dX = σ(X) dW + b̄(X) dt + dK` on the grid of `w`.
pub fn integrate_ito_reflected(
    coeffs: &dyn Coefficients,
    domain: &DomainShape,
    w: &BrownianPath,
    c: &CorrectionMatrix,
    x0: &[f64],
) -> Result<ReflectedSolution> {
    check_inputs(coeffs, domain, w, x0)?;
    check_correction(coeffs, c)?;
    let (d, r) = (coeffs.state_dim(), coeffs.noise_dim());
    let mut ws = Workspace::new(d, r);
    projected_euler(
        domain,
        *w.grid(),
        d,
        r,
        w.path().values(),
        x0,
        Scheme::ItoReference,
        &mut ws,
        |x, ws| corrected_drift_into(coeffs, c, x, ws),
    )
}

/// Fine-step projected Euler for `dX = σ(X) dB^δ + b(X) dt + dK` with `B^δ` built from `w`.
///
/// `B^δ` vanishes on `[0, δ]`, so only the drift and the reflection act there.
pub fn integrate_driven_reflected(
    coeffs: &dyn Coefficients,
    domain: &DomainShape,
    driver: &ApproxDriver,
    w: &BrownianPath,
    x0: &[f64],
) -> Result<ReflectedSolution> {
    check_inputs(coeffs, domain, w, x0)?;
    if driver.r() != coeffs.noise_dim() {
        return Err(Error::DimensionMismatch(format!(
            "driver has {} components but the noise dimension is {}",
            driver.r(),
            coeffs.noise_dim()
        )));
    }
    let b = driver.b_shifted_nodes(w)?;
    let (d, r) = (coeffs.state_dim(), coeffs.noise_dim());
    let mut ws = Workspace::new(d, r);
    projected_euler(
        domain,
        *w.grid(),
        d,
        r,
        &b,
        x0,
        Scheme::DrivenOde,
        &mut ws,
        |x, ws| {
            coeffs.sigma(x, &mut ws.sigma);
            coeffs.drift(x, &mut ws.drift);
        },
    )
}

/// `max_j |x_a(t_j) - x_b(t_j)|^p`.
pub fn coupled_sup_error(a: &ReflectedSolution, b: &ReflectedSolution, p: f64) -> Result<f64> {
    sup_error_paths(&a.x, &b.x, p)
}

pub(crate) fn sup_error_paths(a: &SampledPath, b: &SampledPath, p: f64) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", a.grid(), b.grid())));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    let gap = (0..a.n_nodes())
        .map(|k| distance(a.node(k), b.node(k)))
        .fold(0.0, f64::max);
    Ok(gap.powf(p))
}
