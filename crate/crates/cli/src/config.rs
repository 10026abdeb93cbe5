use std::fmt;
use std::path::Path;

use bridge_core::prior::SignalPrior;
use bridge_core::prox::Exponent;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config kind `{found}` does not match subcommand `{expected}`")]
    KindMismatch { expected: Kind, found: Kind },
    #[error("grid `{0}` is required for this kind and must be nonempty")]
    EmptyGrid(&'static str),
    #[error("invalid value in `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Phase,
    AmseCurve,
    ExpansionCheck,
    FiniteSample,
    AmpTrace,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Phase => "phase",
            Kind::AmseCurve => "amse_curve",
            Kind::ExpansionCheck => "expansion_check",
            Kind::FiniteSample => "finite_sample",
            Kind::AmpTrace => "amp_trace",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        [
            Kind::Phase,
            Kind::AmseCurve,
            Kind::ExpansionCheck,
            Kind::FiniteSample,
            Kind::AmpTrace,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of evenly spaced noise levels on `[0, 0.25]` when none are given.
pub const DEFAULT_SIGMA_POINTS: usize = 26;
pub const DEFAULT_SIGMA_MAX: f64 = 0.25;

pub fn default_sigma_grid() -> Vec<f64> {
    (0..DEFAULT_SIGMA_POINTS)
        .map(|i| DEFAULT_SIGMA_MAX * i as f64 / (DEFAULT_SIGMA_POINTS - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
    pub sigma_w: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub ell: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Law of the nonzero part; the sparsity level comes from the `epsilon` grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub atoms: Option<Vec<[f64; 2]>>,
    pub density: Option<DensityConfig>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            atoms: Some(vec![[1.0, 0.5], [-1.0, 0.5]]),
            density: None,
        }
    }
}

impl PriorConfig {
    pub fn build(&self, epsilon: f64) -> bridge_core::error::Result<SignalPrior> {
        match (&self.atoms, &self.density) {
            (Some(atoms), None) => {
                SignalPrior::new(epsilon, atoms.iter().map(|a| (a[0], a[1])).collect())
            }
            (None, Some(d)) => SignalPrior::power_density(epsilon, d.ell, d.scale),
            _ => Err(bridge_core::error::Error::InvalidPrior(
                "give exactly one of `atoms` or `density`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// CSV file name inside the output directory; defaults to `<kind>.csv`.
    pub output: Option<String>,
    /// AMP iterations for `amp_trace`, or the cap for the AMP comparison in
    /// `finite_sample`.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Run AMP alongside the solver in `finite_sample`.
    #[serde(default)]
    pub amp: bool,
    /// Points in the oracle-tuning penalty grid.
    #[serde(default = "default_lambda_points")]
    pub lambda_points: usize,
    /// Solver tolerance for `finite_sample`.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_replicates() -> usize {
    1
}
fn default_iterations() -> usize {
    10
}
fn default_lambda_points() -> usize {
    40
}
fn default_tol() -> f64 {
    1e-8
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn sigma_grid(&self) -> Vec<f64> {
        self.grid.sigma_w.clone().unwrap_or_else(default_sigma_grid)
    }

    pub fn output_name(&self, kind: Kind) -> String {
        self.output
            .clone()
            .unwrap_or_else(|| format!("{}.csv", kind.name()))
    }

    /// Checks the grids `kind` needs and pins `self.kind`.
    pub fn validate(&mut self, kind: Kind) -> Result<(), ConfigError> {
        if let Some(found) = self.kind {
            if found != kind {
                return Err(ConfigError::KindMismatch {
                    expected: kind,
                    found,
                });
            }
        }
        self.kind = Some(kind);
        let g = &self.grid;
        if g.epsilon.is_empty() {
            return Err(ConfigError::EmptyGrid("epsilon"));
        }
        if g.q.is_empty() {
            return Err(ConfigError::EmptyGrid("q"));
        }
        for &e in &g.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(invalid("grid.epsilon", format!("{e} is outside (0, 1)")));
            }
        }
        for &q in &g.q {
            Exponent::new(q).map_err(|e| invalid("grid.q", e.to_string()))?;
        }
        if kind == Kind::Phase {
            return Ok(());
        }
        if g.delta.is_empty() {
            return Err(ConfigError::EmptyGrid("delta"));
        }
        for &d in &g.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("grid.delta", format!("{d} is not positive")));
            }
        }
        let sigmas = self.sigma_grid();
        if sigmas.is_empty() {
            return Err(ConfigError::EmptyGrid("sigma_w"));
        }
        for &s in &sigmas {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid("grid.sigma_w", format!("{s} is negative")));
            }
        }
        self.prior
            .build(g.epsilon[0])
            .map_err(|e| invalid("prior", e.to_string()))?;
        if matches!(kind, Kind::FiniteSample | Kind::AmpTrace) {
            if g.p.is_empty() {
                return Err(ConfigError::EmptyGrid("p"));
            }
            if g.p.iter().any(|&p| p < 2) {
                return Err(invalid("grid.p", "dimensions must be at least 2".into()));
            }
            if self.replicates == 0 {
                return Err(invalid("replicates", "must be at least 1".into()));
            }
            if sigmas.iter().any(|&s| s == 0.0) {
                return Err(invalid("grid.sigma_w", "simulation needs sigma_w > 0".into()));
            }
        }
        if kind == Kind::FiniteSample && self.lambda_points == 0 {
            return Err(invalid("lambda_points", "must be at least 1".into()));
        }
        Ok(())
    }
}

fn invalid(field: &'static str, reason: String) -> ConfigError {
    ConfigError::Invalid { field, reason }
}
