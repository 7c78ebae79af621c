//! Self-describing JSON record of a solved run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{RunConfig, ShockConfig};
use crate::model::{Grid, ModelSpec};
use crate::solver::{Action, Policy, Region, ResidualReport, ValueFunction};

pub const ARTIFACT_FORMAT: &str = "impulse-maint/run";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArtifactError {
    #[error("artifact is not valid JSON: {0}")]
    Syntax(String),
    #[error("incompatible artifact: format `{format}` version {version}, expected `{ARTIFACT_FORMAT}` version {ARTIFACT_VERSION}")]
    Incompatible { format: String, version: u64 },
    #[error("corrupted artifact: {0}")]
    Integrity(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEcho {
    /// Resolved model. Lognormal shocks appear in log space.
    pub spec: ModelSpec,
    /// Shock law as written in the config.
    pub shocks_requested: ShockConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMeta {
    pub h: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveMeta {
    pub iterations: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    pub final_gap: f64,
    pub region_tol: f64,
    pub boundary: f64,
    pub max_abs_qvi_residual: f64,
    /// Only recorded on request; it would break byte-identical reruns.
    pub wall_time_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueRow {
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyRow {
    pub r: f64,
    pub region: Region,
    pub steps: usize,
    pub zeta_star: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualRow {
    pub r: f64,
    pub dynkin: f64,
    pub intervention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArtifact {
    pub format: String,
    pub version: u32,
    pub model: ModelEcho,
    pub grid: GridMeta,
    pub solve: SolveMeta,
    pub value_table: Vec<ValueRow>,
    pub policy_table: Vec<PolicyRow>,
    pub residual_table: Vec<ResidualRow>,
}

impl RunArtifact {
    pub fn assemble(
        config: &RunConfig,
        vf: &ValueFunction,
        policy: &Policy,
        residuals: &ResidualReport,
        wall_time_seconds: Option<f64>,
    ) -> RunArtifact {
        let nodes = vf.grid.nodes();
        RunArtifact {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            model: ModelEcho {
                spec: config.model.clone(),
                shocks_requested: config.shocks_requested.clone(),
            },
            grid: GridMeta {
                h: config.h,
                intervals: vf.grid.intervals(),
            },
            solve: SolveMeta {
                iterations: vf.iterations,
                epsilon: vf.tolerance,
                max_iter: config.max_iter,
                final_gap: vf.final_gap,
                region_tol: config.region_tol(),
                boundary: policy.boundary(),
                max_abs_qvi_residual: residuals.max_abs_qvi(),
                wall_time_seconds,
            },
            value_table: nodes
                .iter()
                .zip(&vf.values)
                .map(|(&r, &value)| ValueRow { r, value })
                .collect(),
            policy_table: nodes
                .iter()
                .zip(policy.actions())
                .map(|(&r, a)| {
                    let (steps, zeta_star, target) = match *a {
                        Action::Intervene { steps, zeta, target } => (steps, zeta, target),
                        Action::NoIntervention => (0, 0.0, r),
                        Action::Cemetery => (0, 0.0, 0.0),
                    };
                    PolicyRow {
                        r,
                        region: a.region(),
                        steps,
                        zeta_star,
                        target,
                    }
                })
                .collect(),
            residual_table: nodes
                .iter()
                .enumerate()
                .map(|(j, &r)| ResidualRow {
                    r,
                    dynkin: residuals.dynkin[j],
                    intervention: residuals.intervention[j],
                })
                .collect(),
        }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model.spec
    }

    pub fn grid(&self) -> Result<Grid, ArtifactError> {
        Grid::build(&self.model.spec, self.grid.h).map_err(|e| ArtifactError::Integrity(e.to_string()))
    }

    pub fn value_function(&self) -> Result<ValueFunction, ArtifactError> {
        Ok(ValueFunction {
            grid: self.grid()?,
            values: self.value_table.iter().map(|row| row.value).collect(),
            iterations: self.solve.iterations,
            final_gap: self.solve.final_gap,
            tolerance: self.solve.epsilon,
        })
    }

    pub fn policy(&self) -> Result<Policy, ArtifactError> {
        let h = self.model.spec.ceiling / self.grid.intervals as f64;
        let actions = self
            .policy_table
            .iter()
            .map(|row| match row.region {
                Region::Cemetery => Action::Cemetery,
                Region::B => Action::NoIntervention,
                Region::A => Action::Intervene {
                    steps: row.steps,
                    zeta: row.zeta_star,
                    target: row.target,
                },
            })
            .collect();
        Policy::new(h, actions).map_err(|e| ArtifactError::Integrity(e.to_string()))
    }

    fn check_integrity(&self) -> Result<(), ArtifactError> {
        let bad = |m: String| Err(ArtifactError::Integrity(m));
        self.model
            .spec
            .validate()
            .map_err(|e| ArtifactError::Integrity(format!("model: {e}")))?;
        let n = self.grid.intervals;
        let expected = n + 1;
        for (name, len) in [
            ("value_table", self.value_table.len()),
            ("policy_table", self.policy_table.len()),
            ("residual_table", self.residual_table.len()),
        ] {
            if len != expected {
                return bad(format!("{name} has {len} rows, expected {expected}"));
            }
        }
        let grid = self.grid()?;
        if grid.intervals() != n {
            return bad(format!("grid.h gives {} intervals, header says {n}", grid.intervals()));
        }
        if self.value_table.windows(2).any(|w| w[0].r >= w[1].r || w[1].r.is_nan()) {
            return bad("value_table states are not strictly increasing".into());
        }
        for (j, node) in grid.nodes().iter().enumerate() {
            let rows = [self.value_table[j].r, self.policy_table[j].r, self.residual_table[j].r];
            if rows.iter().any(|r| r != node) {
                return bad(format!("row {j} does not sit on grid node {node}"));
            }
            if self.policy_table[j].region == Region::A && self.policy_table[j].steps == 0 {
                return bad(format!("row {j} intervenes with zero steps"));
            }
        }
        if self.value_table[0].value != 0.0 {
            return bad("value at the failure state must be 0".into());
        }
        self.policy().map(|_| ())
    }
}

/// Serializes an artifact as pretty JSON with a trailing newline.
pub fn save_artifact(artifact: &RunArtifact) -> String {
    let mut text = serde_json::to_string_pretty(artifact).expect("artifact fields are finite and serializable");
    text.push('\n');
    text
}

/// Parses an artifact, checking the format tag, version and table shapes.
pub fn load_artifact(text: &str) -> Result<RunArtifact, ArtifactError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ArtifactError::Syntax(e.to_string()))?;
    let format = value.get("format").and_then(|v| v.as_str()).unwrap_or_default();
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if format != ARTIFACT_FORMAT || version != u64::from(ARTIFACT_VERSION) {
        return Err(ArtifactError::Incompatible {
            format: format.to_string(),
            version,
        });
    }
    let artifact: RunArtifact = serde_json::from_value(value).map_err(|e| ArtifactError::Integrity(e.to_string()))?;
    artifact.check_integrity()?;
    Ok(artifact)
}
