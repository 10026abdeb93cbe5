//! Standard normal density and tail helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Upper tail `P(Z > x)`, accurate deep into both tails.
#[inline]
pub fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub fn cdf(x: f64) -> f64 {
    upper_tail(-x)
}

/// `E |Z|^q = 2^(q/2) Gamma((q+1)/2) / sqrt(pi)`.
pub fn abs_moment(q: f64) -> f64 {
    2f64.powf(0.5 * q) * libm::tgamma(0.5 * (q + 1.0)) / PI.sqrt()
}

/// `E[eta_1(Z; chi)^2] = 2[(1 + chi^2) Q(chi) - chi phi(chi)]`.
pub fn soft_threshold_second_moment(chi: f64) -> f64 {
    2.0 * ((1.0 + chi * chi) * upper_tail(chi) - chi * pdf(chi))
}

/// `E[(Z - c)^2 ; Z > a]`.
#[inline]
pub fn shifted_square_tail(a: f64, c: f64) -> f64 {
    (1.0 + c * c) * upper_tail(a) + (a - 2.0 * c) * pdf(a)
}
