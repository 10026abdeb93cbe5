//! Proximal operator of `chi * |z|^q` for `q` in `[1, 2]` and its partial derivatives.
//!
//! `eta_q(u; chi) = argmin_z 0.5 (u - z)^2 + chi |z|^q`. The lasso (`q = 1`) and
//! ridge (`q = 2`) ends have closed forms; in between the magnitude `v = |eta|`
//! is the root of `v + chi q v^(q-1) = |u|`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Distance from 1 or 2 within which an exponent is snapped to the closed form.
pub const SNAP_TOLERANCE: f64 = 1e-9;

const MAX_NEWTON: usize = 100;

/// Penalty exponent `q`, validated to lie in `[1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Exponent(f64);

/// Evaluation path selected by the exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Lasso,
    Bridge(f64),
    Ridge,
}

impl Exponent {
    pub const LASSO: Exponent = Exponent(1.0);
    pub const RIDGE: Exponent = Exponent(2.0);

    pub fn new(q: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&q) {
            return Err(Error::InvalidExponent(q));
        }
        Ok(Exponent(q))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn regime(self) -> Regime {
        if self.0 - 1.0 <= SNAP_TOLERANCE {
            Regime::Lasso
        } else if 2.0 - self.0 <= SNAP_TOLERANCE {
            Regime::Ridge
        } else {
            Regime::Bridge(self.0)
        }
    }

    pub fn is_lasso(self) -> bool {
        matches!(self.regime(), Regime::Lasso)
    }
}

impl TryFrom<f64> for Exponent {
    type Error = Error;
    fn try_from(q: f64) -> Result<Self> {
        Exponent::new(q)
    }
}

impl From<Exponent> for f64 {
    fn from(q: Exponent) -> f64 {
        q.0
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn check_chi(chi: f64) -> Result<()> {
    if !(chi >= 0.0) || !chi.is_finite() {
        return Err(domain("chi", chi, "threshold must be finite and >= 0"));
    }
    Ok(())
}

/// The proximal map for a fixed exponent and threshold.
///
/// Construction validates `chi`; evaluation is then infallible so it can sit
/// inside quadrature and iterative-solver inner loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prox {
    q: Exponent,
    chi: f64,
}

impl Prox {
    pub fn new(q: Exponent, chi: f64) -> Result<Self> {
        check_chi(chi)?;
        Ok(Prox { q, chi })
    }

    pub fn exponent(&self) -> Exponent {
        self.q
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// `eta_q(u; chi)`.
    pub fn eval(&self, u: f64) -> f64 {
        match self.q.regime() {
            Regime::Lasso => soft_threshold(u, self.chi),
            Regime::Ridge => u / (1.0 + 2.0 * self.chi),
            Regime::Bridge(q) => {
                let v = bridge_magnitude(u.abs(), self.chi * q, q);
                v.copysign(u)
            }
        }
    }

    /// Partial derivative in `u`.
    pub fn d1(&self, u: f64) -> f64 {
        match self.q.regime() {
            Regime::Lasso => {
                if u.abs() > self.chi {
                    1.0
                } else {
                    0.0
                }
            }
            Regime::Ridge => 1.0 / (1.0 + 2.0 * self.chi),
            Regime::Bridge(q) => {
                if self.chi == 0.0 {
                    return 1.0;
                }
                let v = bridge_magnitude(u.abs(), self.chi * q, q);
                if v == 0.0 {
                    return 0.0;
                }
                // 1 / (1 + chi q (q-1) v^(q-2)), multiplied through by v^(2-q)
                let w = v.powf(2.0 - q);
                w / (w + self.chi * q * (q - 1.0))
            }
        }
    }

    /// Partial derivative in `chi`. Undefined at the lasso kink, so `q = 1` is an error.
    pub fn d2(&self, u: f64) -> Result<f64> {
        match self.q.regime() {
            Regime::Lasso => Err(Error::UnsupportedAtLasso("derivative in chi")),
            Regime::Ridge => {
                let d = 1.0 + 2.0 * self.chi;
                Ok(-2.0 * u / (d * d))
            }
            Regime::Bridge(q) => {
                let v = bridge_magnitude(u.abs(), self.chi * q, q);
                if v == 0.0 {
                    return Ok(0.0);
                }
                let w = v.powf(2.0 - q);
                Ok(-(q * v / (w + self.chi * q * (q - 1.0))).copysign(u))
            }
        }
    }

    /// Componentwise `eta_q`; bit-identical to a scalar loop.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&x| self.eval(x)).collect()
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), out.len());
        for (o, &x) in out.iter_mut().zip(u) {
            *o = self.eval(x);
        }
    }

    /// Mean of `d1` over a vector, the AMP Onsager average.
    pub fn mean_d1(&self, u: &[f64]) -> f64 {
        if u.is_empty() {
            return 0.0;
        }
        u.iter().map(|&x| self.d1(x)).sum::<f64>() / u.len() as f64
    }
}

/// `eta_q(u; chi)`.
pub fn prox_eval(u: f64, chi: f64, q: Exponent) -> Result<f64> {
    Ok(Prox::new(q, chi)?.eval(u))
}

pub fn prox_d1(u: f64, chi: f64, q: Exponent) -> Result<f64> {
    Ok(Prox::new(q, chi)?.d1(u))
}

pub fn prox_d2(u: f64, chi: f64, q: Exponent) -> Result<f64> {
    Prox::new(q, chi)?.d2(u)
}

pub fn prox_vector(u: &[f64], chi: f64, q: Exponent) -> Result<Vec<f64>> {
    Ok(Prox::new(q, chi)?.apply(u))
}

#[inline]
pub fn soft_threshold(u: f64, chi: f64) -> f64 {
    let m = u.abs() - chi;
    if m > 0.0 {
        m.copysign(u)
    } else {
        0.0
    }
}

/// Nonnegative root `v` of `v + c v^(q-1) = a` for `a >= 0`, `c >= 0`, `1 < q < 2`.
///
/// Newton runs on `s = v^(q-1)`, where the map `s^(1/(q-1)) + c s` is convex and
/// increasing; started above the root it decreases monotonically onto it. The
/// start `min(a / c, a^(q-1))` bounds the root from above and within a factor 2.
/// A bisection pass on `[0, s0]` takes over if Newton fails to settle.
pub(crate) fn bridge_magnitude(a: f64, c: f64, q: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return a;
    }
    let r = 1.0 / (q - 1.0);
    let h = |s: f64| s.powf(r) + c * s - a;
    let s0 = (a / c).min(a.powf(q - 1.0));
    let mut s = s0;
    let mut settled = false;
    for _ in 0..MAX_NEWTON {
        let pr = s.powf(r - 1.0);
        let f = s * pr + c * s - a;
        let df = r * pr + c;
        let step = f / df;
        let next = s - step;
        if !next.is_finite() || next < 0.0 {
            break;
        }
        if step.abs() <= 4.0 * f64::EPSILON * s || next >= s {
            s = next.min(s);
            settled = true;
            break;
        }
        s = next;
    }
    if !settled {
        let (mut lo, mut hi) = (0.0, s0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        s = 0.5 * (lo + hi);
    }
    let cs = c * s;
    let mut v = if cs < 0.5 * a { a - cs } else { s.powf(r) };
    // polish in the original variable
    if v > 0.0 {
        let pv = v.powf(q - 1.0);
        let f = v + c * pv - a;
        let df = 1.0 + c * (q - 1.0) * pv / v;
        let cand = v - f / df;
        if cand > 0.0 && cand.is_finite() {
            let fc = cand + c * cand.powf(q - 1.0) - a;
            if fc.abs() < f.abs() {
                v = cand;
            }
        }
    }
    v.min(a)
}
