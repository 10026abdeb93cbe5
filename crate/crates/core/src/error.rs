use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("exponent q = {0} outside [1, 2]")]
    InvalidExponent(f64),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{0} is not supported for q = 1")]
    UnsupportedAtLasso(&'static str),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("non-finite integrand value at b = {b}, z = {z}")]
    NonFiniteIntegrand { b: f64, z: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate}, error {error_estimate}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error("threshold bracket grew past {limit:e} without the risk turning upward")]
    BracketOverflow { limit: f64 },

    #[error("risk minimizer not unique: golden section found chi = {found}, sweep found lower risk at chi = {better}")]
    NonUniqueMinimum { found: f64, better: f64 },

    #[error("no sign change of the fixed-point map on [{lo}, {hi}] (failure regime or degenerate input)")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("lambda = {lambda} is outside the numerically achievable range [{min}, {max}]")]
    LambdaOutOfRange { lambda: f64, min: f64, max: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("AMP diverged at iteration {iteration}: tau = {tau:e}")]
    AmpDivergence { iteration: usize, tau: f64 },

    #[error("expansion unavailable: {0}")]
    ExpansionUnavailable(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        reason,
    }
}
