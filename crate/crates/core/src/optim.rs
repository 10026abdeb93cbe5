//! Scalar root finding and bracketed minimization.

use crate::error::{Error, Result};

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2

/// Brent's method on a bracket `[a, b]` with `f(a)`, `f(b)` of opposite sign
/// (or one of them zero). Stops when the bracket is below
/// `xtol + rtol * |x|` or `f` vanishes exactly.
pub fn brent_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xtol: f64,
    rtol: f64,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo: a, hi: b });
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * (xtol + rtol * b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut qq);
            if a == c {
                p = 2.0 * m * s;
                qq = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                qq = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                qq = -qq;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * qq - (tol * qq).abs()).min((e * qq).abs()) {
                e = d;
                d = p / qq;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::NonConvergence {
        what: "Brent root search",
        iterations: 300,
        residual: fb.abs(),
    })
}

/// Golden-section minimization of `f` on `[lo, hi]` down to width
/// `xtol(x)`. On exact ties the left point wins, so flat stretches resolve to
/// their smallest abscissa. Returns `(x, f(x))` for the best point seen.
pub fn golden_min(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    xtol: impl Fn(f64) -> f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    let mut x1 = a + GOLDEN * (b - a);
    let mut x2 = b - GOLDEN * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for _ in 0..max_iter {
        if b - a <= xtol(best.0) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + GOLDEN * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - GOLDEN * (b - a);
            f2 = f(x2)?;
        }
        for (x, fx) in [(x1, f1), (x2, f2)] {
            if fx < best.1 || (fx == best.1 && x < best.0) {
                best = (x, fx);
            }
        }
    }
    Ok(best)
}
