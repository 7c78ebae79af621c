//! TOML model configuration.
//!
//! ```toml
//! lambda = 0.5
//! delta = 0.2
//! ceiling = 1.0
//!
//! [shocks]
//! kind = "lognormal_moments"
//! params = { mean = 0.3, sd = 1.0 }
//!
//! [utility]
//! kind = "exponential_aversion"
//! params = { scale = 5.0, alpha = 2.0 }
//!
//! [cost]
//! kind = "quadratic"
//! params = { fixed = 0.1 }
//!
//! [grid]
//! h = 0.005
//!
//! [solver]
//! epsilon = 1e-8
//! max_iter = 10000
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{intervals_for, CostSpec, ModelError, ModelSpec, ShockDistribution, UtilitySpec};
use crate::solver::{DEFAULT_EPSILON, DEFAULT_MAX_ITER};

pub const DEFAULT_H: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogParams {
    pub location: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentParams {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateParams {
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomParams {
    pub sizes: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Shock law as written in the config, before conversion to log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ShockConfig {
    LognormalLog(LogParams),
    LognormalMoments(MomentParams),
    Exponential(RateParams),
    Tabulated(AtomParams),
}

impl ShockConfig {
    pub fn resolve(&self) -> Result<ShockDistribution, ModelError> {
        let dist = match self {
            ShockConfig::LognormalLog(p) => ShockDistribution::LogNormal {
                location: p.location,
                scale: p.scale,
            },
            ShockConfig::LognormalMoments(p) => ShockDistribution::lognormal_from_moments(p.mean, p.sd)?,
            ShockConfig::Exponential(p) => ShockDistribution::Exponential { rate: p.rate },
            ShockConfig::Tabulated(p) => {
                if p.sizes.len() != p.probabilities.len() {
                    return Err(ModelError::InvalidParameter {
                        name: "atoms",
                        reason: format!("{} sizes but {} probabilities", p.sizes.len(), p.probabilities.len()),
                    });
                }
                ShockDistribution::Tabulated {
                    atoms: p.sizes.iter().copied().zip(p.probabilities.iter().copied()).collect(),
                }
            }
        };
        dist.validate()?;
        Ok(dist)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AversionParams {
    pub scale: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityTable {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
enum UtilityConfig {
    ExponentialAversion(AversionParams),
    Tabulated(UtilityTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticParams {
    pub fixed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
enum CostConfig {
    Quadratic(QuadraticParams),
    Tabulated(CostTable),
}

fn default_h() -> f64 {
    DEFAULT_H
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(default = "default_h")]
    h: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { h: DEFAULT_H }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    region_tol: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            region_tol: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    lambda: f64,
    delta: f64,
    ceiling: f64,
    shocks: ShockConfig,
    utility: UtilityConfig,
    cost: CostConfig,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    solver: SolverSection,
}

/// A validated model together with the discretization and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Shock law as written, kept for the artifact echo.
    pub shocks_requested: ShockConfig,
    pub h: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Explicit region tolerance; see [`RunConfig::region_tol`].
    pub region_tol: Option<f64>,
}

impl RunConfig {
    /// Tolerance for `V - MV` when classifying nodes, `10 * epsilon` unless set.
    pub fn region_tol(&self) -> f64 {
        self.region_tol.unwrap_or(10.0 * self.epsilon)
    }
}

fn with_prefix(prefix: &str, e: ModelError) -> ConfigError {
    match e {
        ModelError::InvalidParameter { name, reason } => {
            let name = name.rsplit('.').next().unwrap_or(name);
            ConfigError::Validation(format!("`{prefix}{name}`: {reason}"))
        }
        other => ConfigError::Validation(format!("{prefix}: {other}")),
    }
}

fn positive(name: &str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::Validation(format!(
            "`{name}` must be finite and > 0, got {value}"
        )))
    }
}

/// Parses and validates a model configuration document.
pub fn parse_model_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    positive("lambda", raw.lambda)?;
    positive("delta", raw.delta)?;
    positive("ceiling", raw.ceiling)?;

    let shocks = raw.shocks.resolve().map_err(|e| with_prefix("shocks.params.", e))?;
    let utility = match raw.utility {
        UtilityConfig::ExponentialAversion(p) => UtilitySpec::ExponentialAversion {
            scale: p.scale,
            alpha: p.alpha,
        },
        UtilityConfig::Tabulated(t) => UtilitySpec::Tabulated { values: t.values },
    };
    let cost = match raw.cost {
        CostConfig::Quadratic(p) => CostSpec::Quadratic { fixed: p.fixed },
        CostConfig::Tabulated(t) => CostSpec::Tabulated { rows: t.rows },
    };
    let model = ModelSpec::new(raw.lambda, raw.delta, raw.ceiling, shocks, utility, cost).map_err(|e| match e {
        ModelError::InvalidParameter { name, .. } if name.starts_with("utility") => with_prefix("utility.params.", e),
        ModelError::InvalidParameter { name, .. } if name.starts_with("cost") => with_prefix("cost.params.", e),
        other => ConfigError::Validation(other.to_string()),
    })?;

    intervals_for(model.ceiling, raw.grid.h).map_err(|_| {
        ConfigError::Validation(format!(
            "`grid.h` = {} must be positive and divide `ceiling` = {} into a whole number of intervals",
            raw.grid.h, model.ceiling
        ))
    })?;
    positive("solver.epsilon", raw.solver.epsilon)?;
    if raw.solver.max_iter == 0 {
        return Err(ConfigError::Validation("`solver.max_iter` must be at least 1".into()));
    }
    if let Some(tol) = raw.solver.region_tol {
        positive("solver.region_tol", tol)?;
    }

    Ok(RunConfig {
        model,
        shocks_requested: raw.shocks,
        h: raw.grid.h,
        epsilon: raw.solver.epsilon,
        max_iter: raw.solver.max_iter,
        region_tol: raw.solver.region_tol,
    })
}
