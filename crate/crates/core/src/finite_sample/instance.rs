use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};
use crate::prior::SignalPrior;
use crate::rng::{stream_rng, STREAM_DESIGN, STREAM_NOISE};

/// One draw `(X, beta, w, y)` with `X_ij ~ N(0, 1/n)`, `w_i ~ N(0, sigma_w^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// `n x p`, row-major.
    pub x: Array2<f64>,
    pub beta: Array1<f64>,
    pub noise: Array1<f64>,
    pub y: Array1<f64>,
    pub delta: f64,
    pub sigma_w: f64,
    pub seed: u64,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `X v`.
    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        self.x.dot(v)
    }

    /// `X^T z`, accumulated row by row so the row-major storage is read
    /// contiguously.
    pub fn apply_t(&self, z: &Array1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.p());
        for (row, &zi) in self.x.rows().into_iter().zip(z) {
            out.scaled_add(zi, &row);
        }
        out
    }
}

/// Deterministic in `seed`; `n = round(delta p)`.
pub fn generate_instance(
    p: usize,
    delta: f64,
    prior: &SignalPrior,
    sigma_w: f64,
    seed: u64,
) -> Result<Instance> {
    if p < 2 {
        return Err(domain("p", p as f64, "must be at least 2"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain("delta", delta, "must be positive"));
    }
    if !(sigma_w >= 0.0 && sigma_w.is_finite()) {
        return Err(domain("sigma_w", sigma_w, "must be nonnegative"));
    }
    let n = (delta * p as f64).round() as usize;
    if n == 0 {
        return Err(domain("delta", delta, "n = round(delta p) is zero"));
    }
    let beta = Array1::from(prior.sample_signal(p, seed));
    let scale = 1.0 / (n as f64).sqrt();
    let mut rng = stream_rng(seed, STREAM_DESIGN);
    let x = Array2::from_shape_simple_fn((n, p), || {
        let g: f64 = StandardNormal.sample(&mut rng);
        g * scale
    });
    let mut rng = stream_rng(seed, STREAM_NOISE);
    let noise = Array1::from_shape_simple_fn(n, || {
        let g: f64 = StandardNormal.sample(&mut rng);
        g * sigma_w
    });
    let y = x.dot(&beta) + &noise;
    Ok(Instance {
        x,
        beta,
        noise,
        y,
        delta,
        sigma_w,
        seed,
    })
}
