//! CSV tables for plotting.

use std::fmt::Write as _;
use std::str::FromStr;

use super::artifact::RunArtifact;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotData {
    /// `r, value`: the optimal expected profit.
    ValueFunction,
    /// `r, region, zeta_star, target`: the repair size, zero where waiting.
    Policy,
    /// `r, dynkin_residual, intervention_residual, qvi_residual`.
    Residuals,
}

impl FromStr for PlotData {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "value_function" => Ok(PlotData::ValueFunction),
            "policy" => Ok(PlotData::Policy),
            "residuals" => Ok(PlotData::Residuals),
            other => Err(format!(
                "unknown table `{other}`, expected value_function, policy or residuals"
            )),
        }
    }
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn export_plot_data(artifact: &RunArtifact, which: PlotData) -> String {
    let mut out = String::new();
    match which {
        PlotData::ValueFunction => {
            out.push_str("r,value\n");
            for row in &artifact.value_table {
                let _ = writeln!(out, "{},{}", num(row.r), num(row.value));
            }
        }
        PlotData::Policy => {
            out.push_str("r,region,zeta_star,target\n");
            for row in &artifact.policy_table {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    num(row.r),
                    row.region.label(),
                    num(row.zeta_star),
                    num(row.target)
                );
            }
        }
        PlotData::Residuals => {
            out.push_str("r,dynkin_residual,intervention_residual,qvi_residual\n");
            for row in &artifact.residual_table {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    num(row.r),
                    num(row.dynkin),
                    num(row.intervention),
                    num(row.dynkin.min(row.intervention))
                );
            }
        }
    }
    out
}
