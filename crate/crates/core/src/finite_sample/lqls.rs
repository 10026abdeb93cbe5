//! Penalized least squares `1/2 ||y - X b||^2 + lambda sum |b_i|^q` by
//! accelerated proximal gradient with function-value restarts.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{domain, Error, Result};
use crate::prox::{Exponent, Prox, Regime};

use super::instance::Instance;

pub const MAX_ITERATIONS: usize = 100_000;
/// Objective increases below this relative size are treated as rounding noise;
/// near the optimum they would otherwise trigger endless restarts.
const ROUNDING_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub beta: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Largest eigenvalue of `X^T X` by power iteration.
pub fn lipschitz_constant(inst: &Instance) -> f64 {
    let p = inst.p();
    let mut v = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
    let mut est = 0.0;
    for _ in 0..300 {
        let w = inst.apply_t(&inst.apply(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / norm;
        if (next - est).abs() <= 1e-8 * next {
            est = next;
            break;
        }
        est = next;
    }
    est
}

pub fn objective(inst: &Instance, beta: ArrayView1<f64>, lambda: f64, q: Exponent) -> f64 {
    objective_from_fit(inst, &inst.x.dot(&beta), beta, lambda, q)
}

/// Stateful solver: caches the Lipschitz constant of one instance and
/// supports warm starts along a penalty path.
pub struct LqlsSolver<'a> {
    inst: &'a Instance,
    q: Exponent,
    lipschitz: f64,
    opts: SolverOptions,
}

impl<'a> LqlsSolver<'a> {
    pub fn new(inst: &'a Instance, q: Exponent, opts: SolverOptions) -> Self {
        // power iteration under-estimates; pad so the step stays below 1/L
        let lipschitz = lipschitz_constant(inst) * 1.01;
        LqlsSolver {
            inst,
            q,
            lipschitz,
            opts,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn solve(&self, lambda: f64, warm: Option<&Array1<f64>>) -> Result<Solution> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(domain("lambda", lambda, "must be nonnegative and finite"));
        }
        let inst = self.inst;
        let (n, p) = (inst.n(), inst.p());
        if lambda == 0.0 && self.q.is_lasso() && n < p {
            return Err(domain(
                "lambda",
                lambda,
                "q = 1 with lambda = 0 and n < p has no unique solution",
            ));
        }
        let step = 1.0 / self.lipschitz;
        let prox = Prox::new(self.q, lambda * step)?;
        let tol = self.opts.tol;

        // track X x and X y alongside x and y so each step costs two products
        let mut x = warm.cloned().unwrap_or_else(|| Array1::zeros(p));
        let mut xx = inst.apply(&x);
        let mut f_x = objective_from_fit(inst, &xx, x.view(), lambda, self.q);
        let mut yk = x.clone();
        let mut xyk = xx.clone();
        let mut t = 1.0f64;
        let mut grad_step = Array1::zeros(p);
        let mut x_next = Array1::zeros(p);
        let mut residual = f64::INFINITY;
        for k in 1..=self.opts.max_iter {
            let g = inst.apply_t(&(&xyk - &inst.y));
            Zip::from(&mut grad_step)
                .and(&yk)
                .and(&g)
                .for_each(|s, &yv, &gv| *s = yv - step * gv);
            prox.apply_into(
                grad_step.as_slice().expect("contiguous"),
                x_next.as_slice_mut().expect("contiguous"),
            );
            let xx_next = inst.apply(&x_next);
            let f_next = objective_from_fit(inst, &xx_next, x_next.view(), lambda, self.q);

            let d = &yk - &x_next;
            let mapping = d.dot(&d).sqrt() / step;
            residual = mapping;
            let rel_decrease = (f_x - f_next).abs() / f_x.abs().max(f64::MIN_POSITIVE);

            if f_next > f_x + ROUNDING_SLACK * f_x.abs() {
                // restart momentum from the last accepted iterate
                t = 1.0;
                yk.assign(&x);
                xyk.assign(&xx);
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / t_next;
            Zip::from(&mut yk)
                .and(&x_next)
                .and(&x)
                .for_each(|yv, &xn, &xo| *yv = xn + mom * (xn - xo));
            Zip::from(&mut xyk)
                .and(&xx_next)
                .and(&xx)
                .for_each(|yv, &xn, &xo| *yv = xn + mom * (xn - xo));
            std::mem::swap(&mut x, &mut x_next);
            xx = xx_next;
            f_x = f_next;
            t = t_next;
            if rel_decrease < tol && mapping < tol * (p as f64).sqrt() {
                return Ok(Solution {
                    beta: x,
                    objective: f_x,
                    iterations: k,
                });
            }
        }
        Err(Error::NonConvergence {
            what: "accelerated proximal gradient",
            iterations: self.opts.max_iter,
            residual,
        })
    }
}

fn penalty(beta: ArrayView1<f64>, q: Exponent) -> f64 {
    match q.regime() {
        Regime::Lasso => beta.iter().map(|b| b.abs()).sum(),
        Regime::Ridge => beta.iter().map(|b| b * b).sum(),
        Regime::Bridge(qv) => beta.iter().map(|b| b.abs().powf(qv)).sum(),
    }
}

fn objective_from_fit(
    inst: &Instance,
    fit: &Array1<f64>,
    beta: ArrayView1<f64>,
    lambda: f64,
    q: Exponent,
) -> f64 {
    let r = &inst.y - fit;
    0.5 * r.dot(&r) + lambda * penalty(beta, q)
}

/// One-shot solve from zero.
pub fn lqls_solve(inst: &Instance, lambda: f64, q: Exponent, tol: f64) -> Result<Array1<f64>> {
    let solver = LqlsSolver::new(
        inst,
        q,
        SolverOptions {
            tol,
            max_iter: MAX_ITERATIONS,
        },
    );
    Ok(solver.solve(lambda, None)?.beta)
}
