//! Sparse signal prior `(1 - eps) delta_0 + eps g` and expectations under it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{self, QuadratureRule, Tolerance};
use crate::rng::{stream_rng, STREAM_SIGNAL};

/// Law of the nonzero part `G`.
#[derive(Debug, Clone, PartialEq)]
pub enum NonzeroLaw {
    /// Finite support: `(value, weight)` pairs.
    Atoms(Vec<(f64, f64)>),
    /// Symmetric `G` with `|G|` of density `ell t^(ell-1) / scale^ell` on `[0, scale]`,
    /// so that `P(|G| <= t) = (t / scale)^ell` near zero.
    PowerDensity { ell: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorSpec", into = "PriorSpec")]
pub struct SignalPrior {
    epsilon: f64,
    law: NonzeroLaw,
}

/// Text form used in experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub ell: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl TryFrom<PriorSpec> for SignalPrior {
    type Error = Error;

    fn try_from(spec: PriorSpec) -> Result<Self> {
        match (spec.atoms, spec.density) {
            (Some(atoms), None) => {
                SignalPrior::new(spec.epsilon, atoms.into_iter().map(|[v, w]| (v, w)).collect())
            }
            (None, Some(d)) => SignalPrior::power_density(spec.epsilon, d.ell, d.scale),
            _ => Err(Error::InvalidPrior(
                "exactly one of `atoms` or `density` must be given".into(),
            )),
        }
    }
}

impl From<SignalPrior> for PriorSpec {
    fn from(p: SignalPrior) -> Self {
        match p.law {
            NonzeroLaw::Atoms(atoms) => PriorSpec {
                epsilon: p.epsilon,
                atoms: Some(atoms.into_iter().map(|(v, w)| [v, w]).collect()),
                density: None,
            },
            NonzeroLaw::PowerDensity { ell, scale } => PriorSpec {
                epsilon: p.epsilon,
                atoms: None,
                density: Some(DensitySpec { ell, scale }),
            },
        }
    }
}

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

impl SignalPrior {
    pub fn new(epsilon: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        check_epsilon(epsilon)?;
        if atoms.is_empty() {
            return Err(Error::InvalidPrior("no atoms given".into()));
        }
        for &(v, w) in &atoms {
            if !v.is_finite() || v == 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "atom value {v} must be finite and nonzero"
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidPrior(format!("atom weight {w} must be positive")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidPrior(format!("atom weights sum to {total}, not 1")));
        }
        Ok(SignalPrior {
            epsilon,
            law: NonzeroLaw::Atoms(atoms),
        })
    }

    /// `g = (delta_mu + delta_{-mu}) / 2`.
    pub fn symmetric_two_point(epsilon: f64, mu: f64) -> Result<Self> {
        SignalPrior::new(epsilon, vec![(mu, 0.5), (-mu, 0.5)])
    }

    pub fn power_density(epsilon: f64, ell: f64, scale: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(domain("ell", ell, "must be positive"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain("scale", scale, "must be positive"));
        }
        Ok(SignalPrior {
            epsilon,
            law: NonzeroLaw::PowerDensity { ell, scale },
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn law(&self) -> &NonzeroLaw {
        &self.law
    }

    /// `E |G|^r`.
    pub fn moment_abs_g(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(domain("r", r, "must be nonnegative"));
        }
        Ok(match &self.law {
            NonzeroLaw::Atoms(atoms) => atoms.iter().map(|&(v, w)| w * v.abs().powf(r)).sum(),
            NonzeroLaw::PowerDensity { ell, scale } => ell * scale.powf(r) / (ell + r),
        })
    }

    /// `E B^2 = eps E G^2`.
    pub fn second_moment(&self) -> f64 {
        self.epsilon * self.moment_abs_g(2.0).expect("r = 2 is valid")
    }

    /// Smallest `|G|` in the support (0 for densities).
    pub fn min_abs_nonzero(&self) -> f64 {
        match &self.law {
            NonzeroLaw::Atoms(atoms) => atoms.iter().map(|a| a.0.abs()).fold(f64::INFINITY, f64::min),
            NonzeroLaw::PowerDensity { .. } => 0.0,
        }
    }

    /// `E h(B)`. Callers pass the length scale `sigma` at which `h` varies so
    /// that the density path can place panel breaks where the integrand bends.
    pub fn expect(&self, mut h: impl FnMut(f64) -> Result<f64>, sigma: f64) -> Result<f64> {
        let zero = h(0.0)?;
        let nonzero = match &self.law {
            NonzeroLaw::Atoms(atoms) => {
                let mut acc = 0.0;
                for &(v, w) in atoms {
                    acc += w * h(v)?;
                }
                acc
            }
            NonzeroLaw::PowerDensity { ell, scale } => {
                // |G| = scale * u^(1/ell) with u uniform on [0, 1]; average over the sign
                let (ell, scale) = (*ell, *scale);
                let mut err = None;
                let breaks: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
                    .iter()
                    .map(|k| (k * sigma / scale).powf(ell))
                    .filter(|u| *u > 0.0 && *u < 1.0)
                    .collect();
                let value = quad::integrate(
                    |u| {
                        if err.is_some() {
                            return 0.0;
                        }
                        let t = scale * u.powf(1.0 / ell);
                        match (h(t), h(-t)) {
                            (Ok(a), Ok(b)) => 0.5 * (a + b),
                            (Err(e), _) | (_, Err(e)) => {
                                err = Some(e);
                                0.0
                            }
                        }
                    },
                    0.0,
                    1.0,
                    &breaks,
                    Tolerance {
                        abs: 1e-300,
                        rel: 1e-11,
                        max_intervals: 4000,
                    },
                )?;
                if let Some(e) = err {
                    return Err(e);
                }
                value
            }
        };
        Ok((1.0 - self.epsilon) * zero + self.epsilon * nonzero)
    }

    /// `E_{B,Z} f(B, Z)` by Gauss–Hermite in `Z`, doubling the rule from
    /// `rule.order()` until successive orders agree to `1e-9` (relative).
    /// Integrands too rough for that (kinks) fall back to adaptive Gauss–Kronrod.
    pub fn expect_bz(&self, f: impl Fn(f64, f64) -> f64, rule: &QuadratureRule) -> Result<f64> {
        let eval = |rule: &QuadratureRule| -> Result<f64> {
            self.expect(
                |b| {
                    let mut acc = 0.0;
                    for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
                        let v = f(b, z);
                        if !v.is_finite() {
                            return Err(Error::NonFiniteIntegrand { b, z });
                        }
                        acc += w * v;
                    }
                    Ok(acc)
                },
                1.0,
            )
        };
        let mut order = rule.order().max(1);
        let mut current = eval(rule)?;
        for _ in 0..3 {
            order *= 2;
            let next = eval(&QuadratureRule::gauss_hermite(order))?;
            let settled = (next - current).abs() <= 1e-9 * next.abs().max(1e-300);
            current = next;
            if settled {
                return Ok(current);
            }
        }
        log::debug!("expect_bz: Gauss–Hermite unsettled at order {order}, using adaptive panels");
        self.expect(
            |b| {
                let mut bad = None;
                let v = quad::gaussian_expect(
                    |z| {
                        let v = f(b, z);
                        if !v.is_finite() && bad.is_none() {
                            bad = Some(z);
                        }
                        v
                    },
                    &[0.0, -b],
                    Tolerance::default(),
                )?;
                match bad {
                    Some(z) => Err(Error::NonFiniteIntegrand { b, z }),
                    None => Ok(v),
                }
            },
            1.0,
        )
    }

    /// `p` i.i.d. draws from the prior, deterministic in `seed`.
    pub fn sample_signal(&self, p: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, STREAM_SIGNAL);
        (0..p)
            .map(|_| {
                let active = rng.random::<f64>() < self.epsilon;
                let u: f64 = rng.random();
                let s: f64 = rng.random();
                if !active {
                    return 0.0;
                }
                match &self.law {
                    NonzeroLaw::Atoms(atoms) => {
                        let mut acc = 0.0;
                        for &(v, w) in atoms {
                            acc += w;
                            if u < acc {
                                return v;
                            }
                        }
                        atoms[atoms.len() - 1].0
                    }
                    NonzeroLaw::PowerDensity { ell, scale } => {
                        let mag = scale * (1.0 - u).powf(1.0 / ell);
                        if s < 0.5 {
                            -mag
                        } else {
                            mag
                        }
                    }
                }
            })
            .collect()
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain("epsilon", epsilon, "must lie in (0, 1)"));
    }
    Ok(())
}

/// `E |Z|^q` in closed form.
pub fn moment_abs_z(q: f64) -> f64 {
    crate::normal::abs_moment(q)
}
