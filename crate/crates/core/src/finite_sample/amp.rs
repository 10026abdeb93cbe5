//! Approximate message passing for bridge regression.

use ndarray::{Array1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::prox::{Exponent, Prox};
use crate::risk::chi_min;

use super::instance::Instance;

/// Empirical effective-noise level at which the run is declared divergent.
pub const DIVERGENCE_TAU: f64 = 1e6;
/// Stop once `||beta^{t+1} - beta^t||^2 / p` drops below this.
pub const STEP_TOLERANCE: f64 = 1e-10;

/// State after `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub beta_t: Array1<f64>,
    pub z_t: Array1<f64>,
    /// `||z^t|| / sqrt(n)`.
    pub tau_t: f64,
    pub t: usize,
    /// `<eta'> / delta` used to form `z^t`.
    pub onsager: f64,
}

/// Per-iteration diagnostics; entry `t` describes `beta^t` and `z^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpStep {
    pub t: usize,
    pub tau: f64,
    pub threshold: f64,
    /// `||beta^t - beta||^2 / p`.
    pub mse: f64,
    /// Standard error of `mse` as a mean of per-coordinate squared errors.
    pub mse_se: f64,
    pub onsager: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpRun {
    pub trace: Vec<AmpStep>,
    pub last: AmpState,
    /// Threshold `theta_{T-1}` of the final update.
    pub final_threshold: f64,
    /// `<eta'>` of the final update.
    pub final_mean_d1: f64,
    pub converged: bool,
}

impl AmpRun {
    /// Penalty at which the AMP fixed point satisfies the LQLS optimality
    /// conditions exactly: `theta (1 - <eta'> / delta)`.
    pub fn calibrated_lambda(&self, delta: f64) -> f64 {
        self.final_threshold * (1.0 - self.final_mean_d1 / delta)
    }
}

fn squared_error_stats(a: &Array1<f64>, b: &Array1<f64>) -> (f64, f64) {
    let p = a.len() as f64;
    let (mut s, mut s2) = (0.0, 0.0);
    Zip::from(a).and(b).for_each(|&x, &y| {
        let e = (x - y) * (x - y);
        s += e;
        s2 += e * e;
    });
    let mean = s / p;
    let var = (s2 / p - mean * mean).max(0.0);
    (mean, (var / p).sqrt())
}

/// Iterate `beta^{t+1} = eta_q(X^T z^t + beta^t; chi tau_t^(2-q))`,
/// `z^{t+1} = y - X beta^{t+1} + z^t <eta'> / delta` from `beta^0 = 0`, `z^0 = y`.
pub fn amp_run(inst: &Instance, q: Exponent, chi: f64, max_t: usize) -> Result<AmpRun> {
    let delta_emp = inst.n() as f64 / inst.p() as f64;
    let cmin = chi_min(delta_emp, q)?;
    if !(chi > cmin && chi.is_finite()) {
        return Err(domain("chi", chi, "must exceed chi_min(delta, q)"));
    }
    let (n, p) = (inst.n(), inst.p());
    let mut beta = Array1::<f64>::zeros(p);
    let mut z = inst.y.clone();
    let mut onsager = 0.0;
    let mut trace = Vec::with_capacity(max_t + 1);
    let mut u = Array1::<f64>::zeros(p);
    let mut next = Array1::<f64>::zeros(p);
    let mut final_threshold = 0.0;
    let mut final_mean_d1 = 0.0;
    let mut converged = false;
    let mut t = 0;
    loop {
        let tau = z.dot(&z).sqrt() / (n as f64).sqrt();
        if !(tau.is_finite() && tau <= DIVERGENCE_TAU) {
            return Err(Error::AmpDivergence { iteration: t, tau });
        }
        let threshold = chi * tau.powf(2.0 - q.value());
        let (mse, mse_se) = squared_error_stats(&beta, &inst.beta);
        trace.push(AmpStep {
            t,
            tau,
            threshold,
            mse,
            mse_se,
            onsager,
        });
        if t == max_t || converged {
            break;
        }
        u.assign(&inst.apply_t(&z));
        u += &beta;
        let prox = Prox::new(q, threshold)?;
        let us = u.as_slice().expect("contiguous");
        prox.apply_into(us, next.as_slice_mut().expect("contiguous"));
        let mean_d1 = prox.mean_d1(us);
        let step = {
            let d = &next - &beta;
            d.dot(&d) / p as f64
        };
        onsager = mean_d1 / delta_emp;
        let fit = inst.apply(&next);
        Zip::from(&mut z)
            .and(&inst.y)
            .and(&fit)
            .for_each(|zv, &yv, &fv| *zv = yv - fv + onsager * *zv);
        std::mem::swap(&mut beta, &mut next);
        final_threshold = threshold;
        final_mean_d1 = mean_d1;
        t += 1;
        converged = step < STEP_TOLERANCE;
    }
    let tau_t = trace.last().map(|s| s.tau).unwrap_or(0.0);
    Ok(AmpRun {
        trace,
        last: AmpState {
            beta_t: beta,
            z_t: z,
            tau_t,
            t,
            onsager,
        },
        final_threshold,
        final_mean_d1,
        converged,
    })
}
