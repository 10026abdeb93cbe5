//! Oracle tuning: the penalty minimizing the realized error against the true
//! signal.

use ndarray::Array1;

use crate::error::{domain, Result};
use crate::optim::golden_min;
use crate::prox::Exponent;

use super::instance::Instance;
use super::lqls::{LqlsSolver, SolverOptions};

pub const GRID_POINTS: usize = 40;
pub const GRID_SPAN: f64 = 10.0;

/// `||beta_hat - beta||^2 / p`.
pub fn empirical_mse(beta_hat: &[f64], beta_true: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_true.len() {
        return Err(domain("len", beta_hat.len() as f64, "vectors differ in length"));
    }
    if beta_hat.is_empty() {
        return Err(domain("len", 0.0, "vectors are empty"));
    }
    let s: f64 = beta_hat
        .iter()
        .zip(beta_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / beta_hat.len() as f64)
}

/// `points` log-spaced penalties from `center / span` to `center * span`.
pub fn lambda_grid(center: f64, span: f64, points: usize) -> Result<Vec<f64>> {
    if !(center > 0.0 && center.is_finite()) {
        return Err(domain("center", center, "must be positive"));
    }
    if !(span > 1.0) {
        return Err(domain("span", span, "must exceed 1"));
    }
    if points < 2 {
        return Ok(vec![center]);
    }
    let (lo, hi) = ((center / span).ln(), (center * span).ln());
    Ok((0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedFit {
    pub lambda_best: f64,
    pub mse_best: f64,
    pub beta_best: Array1<f64>,
    /// Realized error at each grid point, in grid order.
    pub grid_mse: Vec<f64>,
}

/// Minimum realized error over `lambda_grid` (sorted ascending), solving from
/// the largest penalty down with warm starts, then one golden-section pass
/// between the neighbours of the best grid point.
pub fn optimal_lambda_mse(
    inst: &Instance,
    q: Exponent,
    lambda_grid: &[f64],
    opts: SolverOptions,
) -> Result<TunedFit> {
    if lambda_grid.is_empty() {
        return Err(domain("lambda_grid", 0.0, "is empty"));
    }
    if lambda_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("lambda_grid", f64::NAN, "must be sorted ascending"));
    }
    let solver = LqlsSolver::new(inst, q, opts);
    let truth = inst.beta.as_slice().expect("contiguous");
    let mut grid_mse = vec![0.0; lambda_grid.len()];
    let mut warm: Option<Array1<f64>> = None;
    let mut best: Option<(usize, Array1<f64>)> = None;
    for (i, &lam) in lambda_grid.iter().enumerate().rev() {
        let sol = solver.solve(lam, warm.as_ref())?;
        let mse = empirical_mse(sol.beta.as_slice().expect("contiguous"), truth)?;
        grid_mse[i] = mse;
        // ties go to the larger penalty, which is visited first
        if best.as_ref().is_none_or(|(j, _)| mse < grid_mse[*j]) {
            best = Some((i, sol.beta.clone()));
        }
        warm = Some(sol.beta);
    }
    let (ib, beta_b) = best.expect("grid is nonempty");
    let mut fit = TunedFit {
        lambda_best: lambda_grid[ib],
        mse_best: grid_mse[ib],
        beta_best: beta_b,
        grid_mse,
    };
    if lambda_grid.len() >= 3 {
        let lo = lambda_grid[ib.saturating_sub(1)].ln();
        let hi = lambda_grid[(ib + 1).min(lambda_grid.len() - 1)].ln();
        let warm = fit.beta_best.clone();
        let mut cache: Vec<(f64, f64, Array1<f64>)> = Vec::new();
        golden_min(
            |l| {
                let sol = solver.solve(l.exp(), Some(&warm))?;
                let mse = empirical_mse(sol.beta.as_slice().expect("contiguous"), truth)?;
                cache.push((l.exp(), mse, sol.beta));
                Ok(mse)
            },
            lo,
            hi,
            |_| 1e-3 * (hi - lo),
            12,
        )?;
        for (lam, mse, beta) in cache {
            if mse < fit.mse_best {
                fit.lambda_best = lam;
                fit.mse_best = mse;
                fit.beta_best = beta;
            }
        }
    }
    Ok(fit)
}
