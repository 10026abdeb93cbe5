//! Quadrature for Gaussian expectations.
//!
//! Two engines live here. [`QuadratureRule`] is a Gauss–Hermite rule normalized
//! to the standard normal, spectrally accurate for smooth integrands. For
//! integrands with known kinks, [`gaussian_expect`] splits the line at the kinks
//! and runs a globally adaptive Gauss–Kronrod (7/15) scheme on each piece.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::normal;

pub const DEFAULT_HERMITE_ORDER: usize = 61;

/// Half-width of the truncated Gaussian integration range; `phi(12)` is below `1e-31`.
pub const GAUSS_RANGE: f64 = 12.0;

/// Gauss–Hermite nodes and weights with `sum w_i f(z_i) ~ E f(Z)`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule with `order` nodes, exact for polynomials of degree `2 order - 1`.
    ///
    /// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix of the
    /// probabilists' Hermite recurrence (off-diagonal `sqrt(k)`), weights the
    /// squared first components of the normalized eigenvectors.
    pub fn gauss_hermite(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut d = vec![0.0f64; n];
        let mut e: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
        e.push(0.0);
        let mut z = vec![0.0f64; n];
        z[0] = 1.0;
        symmetric_tridiagonal_ql(&mut d, &mut e, &mut z);
        let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z.into_iter().map(|v| v * v)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // enforce exact symmetry of the rule
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let (nodes, weights) = pairs.into_iter().map(|(x, w)| (x, w / total)).unzip();
        QuadratureRule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum w_i f(z_i)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::gauss_hermite(DEFAULT_HERMITE_ORDER)
    }
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix with
/// diagonal `d` and sub-diagonal `e` (`e[n-1]` unused). On exit `d` holds the
/// eigenvalues and `z` the first row of the eigenvector matrix, given `z` as
/// the first row of the identity on entry.
fn symmetric_tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 60, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

/// Tolerances for the adaptive engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-15,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Globally adaptive Gauss–Kronrod integral of `f` over the pieces of `[a, b]`
/// delimited by `breaks` (breakpoints outside `(a, b)` are ignored).
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    cuts.push(a);
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let p = kronrod15(&mut f, w[0], w[1]);
        total += p.value;
        err += p.error;
        heap.push(p);
    }
    while err > tol.abs.max(tol.rel * total.abs()) {
        if !total.is_finite() {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                estimate: total,
                error_estimate: err,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further; accept what we have
            heap.push(worst);
            break;
        }
        let left = kronrod15(&mut f, worst.a, mid);
        let right = kronrod15(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // re-sum to shed accumulated update round-off
    Ok(heap.iter().map(|p| p.value).sum())
}

/// `E h(Z)` for `Z ~ N(0, 1)`, splitting at the kinks of `h`.
pub fn gaussian_expect(mut h: impl FnMut(f64) -> f64, kinks: &[f64], tol: Tolerance) -> Result<f64> {
    integrate(
        |z| h(z) * normal::pdf(z),
        -GAUSS_RANGE,
        GAUSS_RANGE,
        kinks,
        tol,
    )
}
