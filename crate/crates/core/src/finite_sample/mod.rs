//! Finite-dimensional experiments: instances, the direct solver, AMP, and
//! oracle-tuned replicates.

pub mod amp;
pub mod instance;
pub mod lqls;
pub mod tuning;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::prior::SignalPrior;
use crate::prox::Exponent;

pub use amp::{amp_run, AmpRun, AmpState, AmpStep};
pub use instance::{generate_instance, Instance};
pub use lqls::{lqls_solve, objective, LqlsSolver, SolverOptions};
pub use tuning::{empirical_mse, lambda_grid, optimal_lambda_mse, TunedFit};

/// Settings shared by all replicates of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSpec {
    pub p: usize,
    pub delta: f64,
    pub sigma_w: f64,
    pub q: Exponent,
    pub prior: SignalPrior,
    /// Penalty grid for oracle tuning.
    pub lambda_grid: Vec<f64>,
    /// Normalized AMP threshold; `None` skips the AMP comparison.
    pub amp_chi: Option<f64>,
    pub amp_max_t: usize,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub seed: u64,
    pub lambda_best: f64,
    pub mse: f64,
    pub amp_iters: Option<usize>,
    /// `||beta_AMP - beta_hat||^2 / p` at the AMP-calibrated penalty.
    pub amp_gap: Option<f64>,
    /// Set when AMP was requested but failed (e.g. diverged at small `p`);
    /// the solver fields remain valid.
    pub amp_error: Option<String>,
}

pub fn run_replicate(spec: &ReplicateSpec, seed: u64) -> Result<ReplicateResult> {
    let inst = generate_instance(spec.p, spec.delta, &spec.prior, spec.sigma_w, seed)?;
    let fit = optimal_lambda_mse(&inst, spec.q, &spec.lambda_grid, spec.solver)?;
    let amp = spec.amp_chi.map(|chi| -> Result<(usize, f64)> {
        let run = amp_run(&inst, spec.q, chi, spec.amp_max_t)?;
        let lam = run.calibrated_lambda(inst.n() as f64 / inst.p() as f64);
        let solver = LqlsSolver::new(&inst, spec.q, spec.solver);
        let sol = solver.solve(lam, Some(&run.last.beta_t))?;
        let gap = empirical_mse(
            run.last.beta_t.as_slice().expect("contiguous"),
            sol.beta.as_slice().expect("contiguous"),
        )?;
        Ok((run.last.t, gap))
    });
    let (amp_iters, amp_gap, amp_error) = match amp {
        Some(Ok((t, gap))) => (Some(t), Some(gap), None),
        Some(Err(e)) => (None, None, Some(e.to_string())),
        None => (None, None, None),
    };
    Ok(ReplicateResult {
        seed,
        lambda_best: fit.lambda_best,
        mse: fit.mse_best,
        amp_iters,
        amp_gap,
        amp_error,
    })
}

/// Replicates for `seeds`, in parallel on the current rayon pool; results come
/// back in seed order.
pub fn run_replicates(spec: &ReplicateSpec, seeds: &[u64]) -> Vec<Result<ReplicateResult>> {
    seeds.par_iter().map(|&s| run_replicate(spec, s)).collect()
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
