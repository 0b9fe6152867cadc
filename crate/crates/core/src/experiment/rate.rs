use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Least-squares fit of `log error = intercept + slope · log δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% interval for the slope from the Student t quantile with `n_used - 2` degrees of freedom.
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_used: usize,
}

/// Fits `(δ, error)` pairs. Pairs with `error <= 0` have no logarithm and are skipped with a warning.
pub fn fit_rate(rows: &[(f64, f64)]) -> Result<RateFit> {
    let mut pts = Vec::with_capacity(rows.len());
    for &(delta, err) in rows {
        if err > 0.0 && delta > 0.0 {
            pts.push((delta.ln(), err.ln()));
        } else {
            log::warn!("excluding row delta={delta}, error={err} from the rate fit: not positive");
        }
    }
    let n = pts.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "a rate fit needs at least 3 rows with positive error, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all rows share one delta".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let slope_stderr = (rss / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(RateFit {
        slope,
        intercept,
        slope_stderr,
        ci_low: slope - t * slope_stderr,
        ci_high: slope + t * slope_stderr,
        n_used: n,
    })
}
