//! State-evolution fixed points of bridge regression and their small-noise
//! expansions.
//!
//! Threshold conventions: with `theta = chi_bar * sigma_bar^(2-q)` the scaling
//! identity of the prox gives
//! `E(eta_q(B + sigma Z; theta) - B)^2 = sigma^2 R_q(chi_bar, sigma)`,
//! so the normalized minimizer `chi*(sigma_bar)` of [`risk_r`] is exactly
//! `chi_bar`. Both `chi_bar` and the raw threshold `theta` are stored.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::normal;
use crate::optim::brent_root;
use crate::prior::{NonzeroLaw, SignalPrior};
use crate::prox::{Exponent, Prox, Regime};
use crate::quad::{gaussian_expect, Tolerance};
use crate::risk::{self, chi_min, m1_curve, mean_d1, min_risk_value, optimal_chi, risk_r};

/// A solved state-evolution point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SEFixedPoint {
    pub q: Exponent,
    pub delta: f64,
    pub sigma_w: f64,
    pub prior: SignalPrior,
    pub sigma_bar: f64,
    /// Normalized threshold; infinite when the estimator is identically zero.
    pub chi_bar: f64,
    /// Raw threshold `chi_bar * sigma_bar^(2-q)`.
    pub threshold: f64,
    pub lambda: f64,
    pub amse: f64,
}

impl SEFixedPoint {
    /// Relative residual of `sigma^2 = sigma_w^2 + sigma^2 R(chi, sigma) / delta`.
    pub fn variance_residual(&self) -> Result<f64> {
        let s2 = self.sigma_bar * self.sigma_bar;
        let r = if self.chi_bar.is_finite() {
            risk_r(self.chi_bar, self.sigma_bar, self.q, &self.prior)?
        } else {
            self.prior.second_moment() / s2
        };
        Ok((s2 - self.sigma_w * self.sigma_w - s2 * r / self.delta).abs() / s2)
    }

    /// Relative residual of the threshold/penalty relation.
    pub fn lambda_residual(&self) -> Result<f64> {
        if !self.chi_bar.is_finite() {
            return Ok(0.0);
        }
        let l = lambda_of_chi(self.chi_bar, self.sigma_bar, self.delta, self.q, &self.prior)?;
        Ok((l - self.lambda).abs() / self.lambda.abs().max(f64::MIN_POSITIVE))
    }
}

fn check_inputs(delta: f64, sigma_w: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain("delta", delta, "must be positive"));
    }
    if !(sigma_w > 0.0 && sigma_w.is_finite()) {
        return Err(domain("sigma_w", sigma_w, "must be positive (use a sequence tending to zero instead of 0)"));
    }
    Ok(())
}

/// `lambda = chi sigma^(2-q) (1 - E eta_q'(B/sigma + Z; chi) / delta)`.
pub fn lambda_of_chi(
    chi: f64,
    sigma_chi: f64,
    delta: f64,
    q: Exponent,
    prior: &SignalPrior,
) -> Result<f64> {
    if chi == 0.0 {
        return Ok(0.0);
    }
    let d1 = mean_d1(chi, sigma_chi, q, prior)?;
    Ok(chi * sigma_chi.powf(2.0 - q.value()) * (1.0 - d1 / delta))
}

/// Fixed point under the risk-minimizing penalty.
///
/// Brent's method on `G(sigma) = sigma_w^2/sigma^2 + min_chi R(chi, sigma)/delta - 1`,
/// which decreases strictly in `sigma`. `G(sigma_w) > 0`, and `G <= 0` at
/// `sqrt(sigma_w^2 + E B^2 / delta)` (the risk never beats its `chi -> inf`
/// limit) and, for `delta > 1`, at `sigma_w sqrt(delta / (delta - 1))` (the
/// risk never beats `chi = 0`).
pub fn solve_tuned(
    delta: f64,
    sigma_w: f64,
    q: Exponent,
    prior: &SignalPrior,
) -> Result<SEFixedPoint> {
    check_inputs(delta, sigma_w)?;
    let w2 = sigma_w * sigma_w;
    let g = |s: f64| -> Result<f64> {
        let (_, r) = min_risk_value(s, q, prior)?;
        Ok(w2 / (s * s) + r / delta - 1.0)
    };
    let lo = sigma_w;
    let mut hi = (w2 + prior.second_moment() / delta).sqrt();
    if delta > 1.0 {
        hi = hi.min(sigma_w * (delta / (delta - 1.0)).sqrt());
    }
    let g_lo = g(lo)?;
    let g_hi = g(hi)?;
    let sigma_bar = brent_root(g, lo, hi, g_lo, g_hi, 0.0, 1e-15)?;

    let (chi_bar, lambda) = match optimal_chi(sigma_bar, q, prior) {
        Ok(o) => (o.chi, lambda_of_chi(o.chi, sigma_bar, delta, q, prior)?),
        Err(Error::BracketOverflow { .. }) => (f64::INFINITY, f64::INFINITY),
        Err(e) => return Err(e),
    };
    let fp = SEFixedPoint {
        q,
        delta,
        sigma_w,
        prior: prior.clone(),
        sigma_bar,
        chi_bar,
        threshold: chi_bar * sigma_bar.powf(2.0 - q.value()),
        lambda,
        amse: delta * (sigma_bar * sigma_bar - w2),
    };
    log::debug!(
        "tuned fixed point q={q} delta={delta} sigma_w={sigma_w}: sigma_bar={sigma_bar} chi={chi_bar} amse={}",
        fp.amse
    );
    Ok(fp)
}

/// `sigma_chi`: the unique root of `1 = sigma_w^2/sigma^2 + R(chi, sigma)/delta`
/// for `chi > chi_min`.
pub fn sigma_of_chi(
    chi: f64,
    delta: f64,
    sigma_w: f64,
    q: Exponent,
    prior: &SignalPrior,
) -> Result<f64> {
    check_inputs(delta, sigma_w)?;
    let w2 = sigma_w * sigma_w;
    let h = |s: f64| -> Result<f64> { Ok(w2 / (s * s) + risk_r(chi, s, q, prior)? / delta - 1.0) };
    let lo = sigma_w;
    let h_lo = h(lo)?;
    let mut hi = 2.0 * sigma_w;
    let mut h_hi = h(hi)?;
    let mut grown = 0;
    while h_hi > 0.0 {
        hi *= 2.0;
        grown += 1;
        if grown > 200 {
            return Err(Error::NoSignChange { lo, hi });
        }
        h_hi = h(hi)?;
    }
    brent_root(h, lo, hi, h_lo, h_hi, 0.0, 1e-15)
}

/// Fixed point for a prescribed penalty `lambda`.
pub fn solve_fixed_lambda(
    lambda: f64,
    delta: f64,
    sigma_w: f64,
    q: Exponent,
    prior: &SignalPrior,
) -> Result<SEFixedPoint> {
    check_inputs(delta, sigma_w)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain("lambda", lambda, "must be positive and finite"));
    }
    let cmin = chi_min(delta, q)?;
    let lam = |chi: f64| -> Result<f64> {
        let s = sigma_of_chi(chi, delta, sigma_w, q, prior)?;
        lambda_of_chi(chi, s, delta, q, prior)
    };

    // left end: lambda(0) = 0 when chi_min = 0; otherwise step in from chi_min
    // until sigma_chi is finite and representable
    let (lo, lam_lo) = if cmin == 0.0 {
        (0.0, 0.0)
    } else {
        let mut off = 1e-3;
        loop {
            let c = cmin * (1.0 + off);
            let v = match lam(c) {
                Ok(v) => Some(v),
                Err(Error::NoSignChange { .. }) => None,
                Err(e) => return Err(e),
            };
            match v {
                Some(v) if v < lambda => break (c, v),
                _ if off > 1e-12 => off *= 1e-2,
                Some(v) => {
                    return Err(Error::LambdaOutOfRange {
                        lambda,
                        min: v,
                        max: f64::INFINITY,
                    })
                }
                None => return Err(Error::NoSignChange { lo: c, hi: f64::INFINITY }),
            }
        }
    };
    let mut hi = lo.max(cmin) + 1.0;
    let mut lam_hi = lam(hi)?;
    let mut grown = 0;
    while lam_hi < lambda {
        hi *= 2.0;
        grown += 1;
        if grown > 60 {
            return Err(Error::LambdaOutOfRange {
                lambda,
                min: lam_lo,
                max: lam_hi,
            });
        }
        lam_hi = lam(hi)?;
    }
    let chi = brent_root(
        |c| Ok(lam(c)? - lambda),
        lo,
        hi,
        lam_lo - lambda,
        lam_hi - lambda,
        0.0,
        1e-14,
    )?;
    let sigma_bar = sigma_of_chi(chi, delta, sigma_w, q, prior)?;
    Ok(SEFixedPoint {
        q,
        delta,
        sigma_w,
        prior: prior.clone(),
        sigma_bar,
        chi_bar: chi,
        threshold: chi * sigma_bar.powf(2.0 - q.value()),
        lambda,
        amse: delta * (sigma_bar * sigma_bar - sigma_w * sigma_w),
    })
}

/// `E psi(eta_q(B + sigma_bar Z; theta), B)` at a fixed point. Kinks of `psi`
/// are expected only where the estimate or the error vanishes.
pub fn loss_at_fixed_point(fp: &SEFixedPoint, psi: impl Fn(f64, f64) -> f64) -> Result<f64> {
    if !fp.chi_bar.is_finite() {
        return fp.prior.expect(|b| Ok(psi(0.0, b)), fp.sigma_bar);
    }
    let prox = Prox::new(fp.q, fp.threshold)?;
    let s = fp.sigma_bar;
    let theta = fp.threshold;
    fp.prior.expect(
        |b| {
            let mut kinks = vec![-b / s, 0.0];
            if fp.q.is_lasso() {
                kinks.push((theta - b) / s);
                kinks.push((-theta - b) / s);
            }
            let mut bad = None;
            let v = gaussian_expect(
                |z| {
                    let v = psi(prox.eval(b + s * z), b);
                    if !v.is_finite() && bad.is_none() {
                        bad = Some(z);
                    }
                    v
                },
                &kinks,
                Tolerance {
                    abs: 1e-300,
                    rel: 1e-13,
                    max_intervals: 4000,
                },
            )?;
            match bad {
                Some(z) => Err(Error::NonFiniteIntegrand { b, z }),
                None => Ok(v),
            }
        },
        s,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExpansionRegime {
    QIn12,
    QEq2,
    LassoBoundedAway,
    LassoMassAtZero,
    Failure,
}

impl std::fmt::Display for ExpansionRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExpansionRegime::QIn12 => "Q_IN_1_2",
            ExpansionRegime::QEq2 => "Q_EQ_2",
            ExpansionRegime::LassoBoundedAway => "LASSO_BOUNDED_AWAY",
            ExpansionRegime::LassoMassAtZero => "LASSO_MASS_AT_ZERO",
            ExpansionRegime::Failure => "FAILURE",
        })
    }
}

/// Small-noise expansion `first_order + coeff * sigma_w^power + ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResult {
    pub regime: ExpansionRegime,
    pub first_order: Option<f64>,
    /// Known constant of the correction; `Some(0)` when the correction is
    /// exponentially small, `None` when only its order is known.
    pub second_order_coeff: Option<f64>,
    pub second_order_power: Option<f64>,
    pub exponentially_small_remainder: bool,
}

impl ExpansionResult {
    /// `first_order + coeff * sigma_w^power` when both terms are known.
    pub fn second_order(&self, sigma_w: f64) -> Option<f64> {
        let first = self.first_order?;
        match (self.second_order_coeff, self.second_order_power) {
            (Some(c), Some(p)) => Some(first + c * sigma_w.powf(p)),
            (Some(c), None) if c == 0.0 => Some(first),
            _ => None,
        }
    }
}

/// Leading slope `delta M_1 / (delta - M_1)` of the LASSO risk in `sigma_w^2`.
pub fn lasso_first_order_slope(delta: f64, epsilon: f64) -> Result<f64> {
    let m1 = m1_curve(epsilon)?.m_value;
    Ok(delta * m1 / (delta - m1))
}

/// Small-noise expansion of the tuned risk at `sigma_w`.
pub fn expansion(
    delta: f64,
    q: Exponent,
    prior: &SignalPrior,
    sigma_w: f64,
) -> Result<ExpansionResult> {
    check_inputs(delta, sigma_w)?;
    let failure = ExpansionResult {
        regime: ExpansionRegime::Failure,
        first_order: None,
        second_order_coeff: None,
        second_order_power: None,
        exponentially_small_remainder: false,
    };
    let w2 = sigma_w * sigma_w;
    let eps = prior.epsilon();
    match q.regime() {
        Regime::Lasso => {
            let m1 = m1_curve(eps)?.m_value;
            if delta <= m1 {
                return Ok(failure);
            }
            let first = delta * m1 / (delta - m1) * w2;
            Ok(match prior.law() {
                NonzeroLaw::Atoms(_) => ExpansionResult {
                    regime: ExpansionRegime::LassoBoundedAway,
                    first_order: Some(first),
                    second_order_coeff: Some(0.0),
                    second_order_power: None,
                    exponentially_small_remainder: true,
                },
                NonzeroLaw::PowerDensity { ell, .. } => ExpansionResult {
                    regime: ExpansionRegime::LassoMassAtZero,
                    first_order: Some(first),
                    second_order_coeff: None,
                    second_order_power: Some(ell + 2.0),
                    exponentially_small_remainder: false,
                },
            })
        }
        Regime::Ridge | Regime::Bridge(_) => {
            if delta <= 1.0 {
                return Ok(failure);
            }
            let first = w2 / (1.0 - 1.0 / delta);
            if q.regime() == Regime::Ridge {
                let coeff = -delta.powi(3) / ((delta - 1.0).powi(3) * eps * prior.moment_abs_g(2.0)?);
                return Ok(ExpansionResult {
                    regime: ExpansionRegime::QEq2,
                    first_order: Some(first),
                    second_order_coeff: Some(coeff),
                    second_order_power: Some(4.0),
                    exponentially_small_remainder: false,
                });
            }
            if let NonzeroLaw::PowerDensity { ell, .. } = prior.law() {
                if *ell < 1.0 {
                    return Err(Error::ExpansionUnavailable(
                        "the q in (1, 2) expansion needs P(|G| <= t) = O(t)",
                    ));
                }
            }
            let qv = q.value();
            let ez = normal::abs_moment(qv);
            let coeff = -delta.powf(qv + 1.0) * (1.0 - eps).powi(2) * ez * ez
                / ((delta - 1.0).powf(qv + 1.0) * eps * prior.moment_abs_g(2.0 * qv - 2.0)?);
            Ok(ExpansionResult {
                regime: ExpansionRegime::QIn12,
                first_order: Some(first),
                second_order_coeff: Some(coeff),
                second_order_power: Some(2.0 * qv),
                exponentially_small_remainder: false,
            })
        }
    }
}

/// Theoretical AMP trajectory for a fixed normalized threshold `chi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SETrace {
    /// `tau_t^2`, `t = 0..=steps`.
    pub tau2: Vec<f64>,
    /// Predicted `||beta^t - beta||^2 / p`, `t = 0..=steps`; `beta^0 = 0`.
    pub mse: Vec<f64>,
}

/// `tau_0^2 = sigma_w^2 + E B^2/delta`,
/// `tau_{t+1}^2 = sigma_w^2 + tau_t^2 R(chi, tau_t) / delta`.
pub fn se_trace(
    delta: f64,
    sigma_w: f64,
    q: Exponent,
    prior: &SignalPrior,
    chi: f64,
    steps: usize,
) -> Result<SETrace> {
    check_inputs(delta, sigma_w)?;
    let w2 = sigma_w * sigma_w;
    let mut tau2 = vec![w2 + prior.second_moment() / delta];
    let mut mse = vec![prior.second_moment()];
    for t in 0..steps {
        let tau = tau2[t].sqrt();
        let m = tau2[t] * risk_r(chi, tau, q, prior)?;
        mse.push(m);
        tau2.push(w2 + m / delta);
    }
    Ok(SETrace { tau2, mse })
}

/// Optimal normalized threshold at noise level `sigma`; re-exported for callers
/// that tune AMP directly.
pub fn tuned_chi(sigma: f64, q: Exponent, prior: &SignalPrior) -> Result<f64> {
    Ok(risk::optimal_chi(sigma, q, prior)?.chi)
}
