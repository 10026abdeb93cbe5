//! Normalized risk `R_q(chi, sigma) = E[eta_q(B/sigma + Z; chi) - B/sigma]^2`,
//! its minimizer over `chi`, and the noiseless phase-transition curves.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::normal::{cdf, pdf, shifted_square_tail, soft_threshold_second_moment, upper_tail};
use crate::optim::{brent_root, golden_min};
use crate::prior::SignalPrior;
use crate::prox::{Exponent, Prox, Regime};
use crate::quad::{gaussian_expect, Tolerance};

/// Upper limit on the threshold bracket before the search gives up.
pub const CHI_BRACKET_LIMIT: f64 = 1e12;

const RISK_TOLERANCE: Tolerance = Tolerance {
    abs: 1e-16,
    rel: 1e-12,
    max_intervals: 4000,
};

/// `E[(eta_q(s + Z; chi) - s)^2]` for one shift `s`.
pub fn atom_risk(s: f64, chi: f64, q: Exponent) -> Result<f64> {
    let s = s.abs();
    match q.regime() {
        Regime::Lasso => Ok(lasso_atom_risk(s, chi)),
        Regime::Ridge => {
            let k = 1.0 / (1.0 + 2.0 * chi);
            let bias = 2.0 * chi * s * k;
            Ok(bias * bias + k * k)
        }
        Regime::Bridge(_) => {
            let prox = Prox::new(q, chi)?;
            gaussian_expect(
                |z| {
                    let d = prox.eval(s + z) - s;
                    d * d
                },
                &[-s],
                RISK_TOLERANCE,
            )
        }
    }
}

fn lasso_atom_risk(s: f64, chi: f64) -> f64 {
    // u = s + Z above chi, below -chi (mirrored), and inside the dead zone
    let upper = shifted_square_tail(chi - s, chi);
    let lower = shifted_square_tail(chi + s, chi);
    let killed = s * s * (cdf(chi - s) - cdf(-chi - s));
    upper + lower + killed
}

/// `E[d/du eta_q(s + Z; chi)]` for one shift `s`.
pub fn atom_mean_d1(s: f64, chi: f64, q: Exponent) -> Result<f64> {
    let s = s.abs();
    match q.regime() {
        Regime::Lasso => Ok(upper_tail(chi - s) + upper_tail(chi + s)),
        Regime::Ridge => Ok(1.0 / (1.0 + 2.0 * chi)),
        Regime::Bridge(_) => {
            let prox = Prox::new(q, chi)?;
            gaussian_expect(|z| prox.d1(s + z), &[-s], RISK_TOLERANCE)
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain("sigma", sigma, "must be positive and finite"));
    }
    Ok(())
}

fn check_chi(chi: f64) -> Result<()> {
    if !(chi >= 0.0 && chi.is_finite()) {
        return Err(domain("chi", chi, "must be nonnegative and finite"));
    }
    Ok(())
}

/// `R_q(chi, sigma)`.
pub fn risk_r(chi: f64, sigma: f64, q: Exponent, prior: &SignalPrior) -> Result<f64> {
    check_sigma(sigma)?;
    check_chi(chi)?;
    if chi == 0.0 {
        return Ok(1.0);
    }
    prior.expect(|b| atom_risk(b / sigma, chi, q), sigma)
}

/// `E[d/du eta_q(B/sigma + Z; chi)]`.
pub fn mean_d1(chi: f64, sigma: f64, q: Exponent, prior: &SignalPrior) -> Result<f64> {
    check_sigma(sigma)?;
    check_chi(chi)?;
    if chi == 0.0 {
        return Ok(1.0);
    }
    prior.expect(|b| atom_mean_d1(b / sigma, chi, q), sigma)
}

/// Minimizer of `R_q(., sigma)` and the attained risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalChi {
    pub chi: f64,
    pub risk: f64,
}

/// `chi*(sigma) = argmin_chi R_q(chi, sigma)`, with a local sweep that
/// rejects the result if a nearby threshold does better.
pub fn optimal_chi(sigma: f64, q: Exponent, prior: &SignalPrior) -> Result<OptimalChi> {
    minimize_risk(sigma, q, prior, true)
}

pub(crate) fn minimize_risk(
    sigma: f64,
    q: Exponent,
    prior: &SignalPrior,
    sweep: bool,
) -> Result<OptimalChi> {
    check_sigma(sigma)?;
    let r = |chi: f64| risk_r(chi, sigma, q, prior);

    // grow [0, hi] geometrically until the risk turns upward
    let mut prev = (0.0, 1.0);
    let mut cur = (1.0, r(1.0)?);
    let lo;
    let hi;
    if cur.1 >= prev.1 {
        lo = 0.0;
        hi = 1.0;
    } else {
        loop {
            let x = 2.0 * cur.0;
            if x > CHI_BRACKET_LIMIT {
                return Err(Error::BracketOverflow {
                    limit: CHI_BRACKET_LIMIT,
                });
            }
            let next = (x, r(x)?);
            if next.1 >= cur.1 {
                lo = prev.0;
                hi = next.0;
                break;
            }
            prev = cur;
            cur = next;
        }
    }

    let (chi, risk) = golden_min(r, lo, hi, |x| 1e-10 * x.max(1.0), 200)?;
    // the endpoint lo = 0 carries risk 1 and is never beaten by a tie
    let best = if lo == 0.0 && risk >= 1.0 {
        OptimalChi { chi: 0.0, risk: 1.0 }
    } else {
        OptimalChi { chi, risk }
    };

    if sweep && best.chi > 0.0 {
        let n = 50;
        for i in 0..n {
            let x = best.chi * (0.9 + 0.2 * i as f64 / (n - 1) as f64);
            let rx = r(x)?;
            if rx < best.risk - SWEEP_SLACK * best.risk {
                log::warn!(
                    "risk minimizer not unique at sigma = {sigma}: chi = {} vs {x}",
                    best.chi
                );
                return Err(Error::NonUniqueMinimum {
                    found: best.chi,
                    better: x,
                });
            }
        }
    }
    Ok(best)
}

/// Relative margin below which a sweep point does not count as better; it
/// absorbs the quadrature error of two independent risk evaluations.
const SWEEP_SLACK: f64 = 1e-10;

/// `inf_chi R_q(chi, sigma)`, reading a bracket overflow as the `chi -> inf`
/// limit `E B^2 / sigma^2` (the risk then decreases toward it monotonically).
pub(crate) fn min_risk_value(sigma: f64, q: Exponent, prior: &SignalPrior) -> Result<(f64, f64)> {
    match minimize_risk(sigma, q, prior, false) {
        Ok(o) => Ok((o.chi, o.risk)),
        Err(Error::BracketOverflow { .. }) => {
            Ok((f64::INFINITY, prior.second_moment() / (sigma * sigma)))
        }
        Err(e) => Err(e),
    }
}

/// One point of the noiseless phase-transition curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub epsilon: f64,
    pub m_value: f64,
    /// Minimizing threshold; `0` where the curve is identically one.
    pub chi_star_star: f64,
}

/// `F(chi, eps) = (1 - eps) E eta_1(Z; chi)^2 + eps (1 + chi^2)`.
pub fn m1_objective(chi: f64, epsilon: f64) -> f64 {
    (1.0 - epsilon) * soft_threshold_second_moment(chi) + epsilon * (1.0 + chi * chi)
}

/// `M_1(eps) = min_chi F(chi, eps)` by Newton on `F' = 0` started at 0.
///
/// `F'` is increasing and concave with `F'(0) < 0`, so the iterates climb
/// monotonically to the root.
pub fn m1_curve(epsilon: f64) -> Result<PhasePoint> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain("epsilon", epsilon, "must lie in (0, 1)"));
    }
    let d1 = |c: f64| 4.0 * (1.0 - epsilon) * (c * upper_tail(c) - pdf(c)) + 2.0 * epsilon * c;
    let d2 = |c: f64| 4.0 * (1.0 - epsilon) * upper_tail(c) + 2.0 * epsilon;
    let mut chi = 0.0f64;
    for _ in 0..100 {
        let step = d1(chi) / d2(chi);
        let next = chi - step;
        if next <= chi || step.abs() <= 1e-15 * chi.max(1.0) {
            chi = next.max(chi);
            break;
        }
        chi = next;
    }
    Ok(PhasePoint {
        epsilon,
        m_value: m1_objective(chi, epsilon),
        chi_star_star: chi,
    })
}

/// `M_q(eps)`: one for `q > 1`, the LASSO curve at `q = 1`.
pub fn mq_curve(epsilon: f64, q: Exponent) -> Result<PhasePoint> {
    if q.is_lasso() {
        return m1_curve(epsilon);
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain("epsilon", epsilon, "must lie in (0, 1)"));
    }
    Ok(PhasePoint {
        epsilon,
        m_value: 1.0,
        chi_star_star: 0.0,
    })
}

/// `E eta_q(Z; chi)^2`.
pub fn noise_second_moment(chi: f64, q: Exponent) -> Result<f64> {
    check_chi(chi)?;
    atom_risk(0.0, chi, q)
}

/// `chi_min = inf{chi >= 0 : E eta_q(Z; chi)^2 <= delta}`; zero for `delta >= 1`.
pub fn chi_min(delta: f64, q: Exponent) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain("delta", delta, "must be positive"));
    }
    if delta >= 1.0 {
        return Ok(0.0);
    }
    let g = |c: f64| Ok(noise_second_moment(c, q)? - delta);
    let mut hi = 1.0;
    let mut ghi = g(hi)?;
    while ghi > 0.0 {
        hi *= 2.0;
        if hi > CHI_BRACKET_LIMIT {
            return Err(Error::BracketOverflow {
                limit: CHI_BRACKET_LIMIT,
            });
        }
        ghi = g(hi)?;
    }
    brent_root(g, 0.0, hi, 1.0 - delta, ghi, 1e-14, 1e-14)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pm1(eps: f64) -> SignalPrior {
        SignalPrior::symmetric_two_point(eps, 1.0).unwrap()
    }

    fn ridge_closed(chi: f64, sigma: f64, eb2: f64) -> f64 {
        let k = 1.0 + 2.0 * chi;
        eb2 / (sigma * sigma) * (2.0 * chi / k).powi(2) + 1.0 / (k * k)
    }

    #[test]
    fn zero_threshold_and_large_threshold_limits() {
        let p = pm1(0.4);
        for q in [1.0, 1.3, 1.5, 2.0] {
            let q = Exponent::new(q).unwrap();
            assert_eq!(risk_r(0.0, 0.7, q, &p).unwrap(), 1.0);
            let far = risk_r(1e6, 1.0, q, &p).unwrap();
            assert!((far - 0.4).abs() < 2e-3, "q = {q}: {far}");
        }
    }

    #[test]
    fn ridge_closed_form_on_grid() {
        let p = pm1(0.4);
        for i in 0..10 {
            for j in 0..10 {
                let chi = 0.05 + 0.4 * i as f64;
                let sigma = 0.05 + 0.2 * j as f64;
                let r = risk_r(chi, sigma, Exponent::RIDGE, &p).unwrap();
                assert_relative_eq!(r, ridge_closed(chi, sigma, 0.4), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn ridge_optimum_closed_form() {
        let p = pm1(0.4);
        for sigma in [0.1, 0.5, 2.0] {
            let o = optimal_chi(sigma, Exponent::RIDGE, &p).unwrap();
            let s2 = sigma * sigma;
            let a = 0.4 / (0.4 + s2);
            assert_relative_eq!(o.risk, 0.4 / (0.4 + s2), max_relative = 1e-10);
            assert_relative_eq!(o.chi, (1.0 - a) / (2.0 * a), max_relative = 1e-4);
        }
    }

    #[test]
    fn lasso_closed_form_matches_quadrature() {
        for s in [0.0, 0.3, 1.0, 2.5, 10.0] {
            for chi in [0.1, 0.8, 1.7, 4.0] {
                let closed = lasso_atom_risk(s, chi);
                let quad = gaussian_expect(
                    |z| {
                        let d = crate::prox::soft_threshold(s + z, chi) - s;
                        d * d
                    },
                    &[chi - s, -chi - s],
                    RISK_TOLERANCE,
                )
                .unwrap();
                assert_relative_eq!(closed, quad, max_relative = 1e-11);
                let d1 = upper_tail(chi - s) + upper_tail(chi + s);
                let quad_d1 = gaussian_expect(
                    |z| if (s + z).abs() > chi { 1.0 } else { 0.0 },
                    &[chi - s, -chi - s],
                    RISK_TOLERANCE,
                )
                .unwrap();
                assert_relative_eq!(d1, quad_d1, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn risk_decreases_in_sigma() {
        let p = pm1(0.3);
        for q in [1.0, 1.5, 1.8, 2.0] {
            let q = Exponent::new(q).unwrap();
            for chi in [0.2, 1.0, 2.5] {
                let mut last = f64::INFINITY;
                for sigma in [0.05, 0.1, 0.2, 0.5, 1.0, 3.0] {
                    let r = risk_r(chi, sigma, q, &p).unwrap();
                    assert!(r <= last + 1e-12, "q={q} chi={chi} sigma={sigma}");
                    last = r;
                }
            }
        }
    }

    #[test]
    fn optimum_is_stationary() {
        let p = pm1(0.4);
        for q in [1.0, 1.5, 1.8] {
            let q = Exponent::new(q).unwrap();
            for sigma in [0.1, 0.4] {
                let o = optimal_chi(sigma, q, &p).unwrap();
                assert!(o.risk <= 1.0);
                let h = 1e-4 * o.chi.max(1e-3);
                let left = risk_r(o.chi - h, sigma, q, &p).unwrap();
                let right = risk_r(o.chi + h, sigma, q, &p).unwrap();
                assert!(left >= o.risk - 1e-12 && right >= o.risk - 1e-12);
            }
        }
    }

    #[test]
    fn lasso_chi_star_tends_to_phase_minimizer() {
        let p = pm1(0.25);
        let target = m1_curve(0.25).unwrap().chi_star_star;
        let o = optimal_chi(1e-3, Exponent::LASSO, &p).unwrap();
        assert!((o.chi - target).abs() < 1e-6, "{} vs {}", o.chi, target);
    }

    #[test]
    fn phase_curve_against_grid_oracle() {
        // the minimum over a 1e-6 grid on [0, 4]
        let eps = 0.25;
        let mut best = f64::INFINITY;
        let mut k = 0;
        while k <= 4_000_000 {
            let c = k as f64 * 1e-6;
            best = best.min(m1_objective(c, eps));
            k += 1;
        }
        let pt = m1_curve(eps).unwrap();
        assert!((pt.m_value - best).abs() < 1e-10);
        assert!(pt.m_value > eps && pt.m_value < 1.0);
    }

    #[test]
    fn mq_is_one_above_lasso() {
        assert_eq!(mq_curve(0.3, Exponent::new(1.5).unwrap()).unwrap().m_value, 1.0);
        assert_eq!(mq_curve(0.9, Exponent::RIDGE).unwrap().m_value, 1.0);
        assert_eq!(
            mq_curve(0.3, Exponent::LASSO).unwrap(),
            m1_curve(0.3).unwrap()
        );
    }

    #[test]
    fn chi_min_examples() {
        assert_eq!(chi_min(1.5, Exponent::new(1.5).unwrap()).unwrap(), 0.0);
        let c = chi_min(0.5, Exponent::LASSO).unwrap();
        assert_relative_eq!(soft_threshold_second_moment(c), 0.5, max_relative = 1e-12);
        let near = chi_min(0.999, Exponent::LASSO).unwrap();
        assert!(near < 0.01);
        let c = chi_min(0.6, Exponent::new(1.5).unwrap()).unwrap();
        assert_relative_eq!(
            noise_second_moment(c, Exponent::new(1.5).unwrap()).unwrap(),
            0.6,
            max_relative = 1e-10
        );
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let q = Exponent::new(1.5).unwrap();
        let p = pm1(0.4);
        let (chi, sigma) = (0.8, 0.5);
        let exact = risk_r(chi, sigma, q, &p).unwrap();
        let prox = Prox::new(q, chi).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        let signal = p.sample_signal(n, 5);
        for b in signal {
            let z: f64 = StandardNormal.sample(&mut rng);
            let s = b / sigma;
            let v = (prox.eval(s + z) - s).powi(2);
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }
}
