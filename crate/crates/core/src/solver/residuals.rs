use super::{DiscreteQvi, ValueFunction};
use crate::model::{ModelError, ModelSpec};

/// Both branches of the QVI evaluated at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `delta V - A V - G`.
    pub dynkin: Vec<f64>,
    /// `V - M V`.
    pub intervention: Vec<f64>,
    /// `min(dynkin, intervention)`.
    pub qvi: Vec<f64>,
}

impl ResidualReport {
    /// `max_{j >= 1} |qvi[j]|`. Node 0 is the boundary condition, not an
    /// equation.
    pub fn max_abs_qvi(&self) -> f64 {
        self.qvi.iter().skip(1).map(|r| r.abs()).fold(0.0, f64::max)
    }

    /// Smallest value of either branch over nodes `j >= 1`.
    pub fn min_branch(&self) -> f64 {
        self.dynkin
            .iter()
            .zip(&self.intervention)
            .skip(1)
            .map(|(a, b)| a.min(*b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every interior node solves the QVI to within `tol`.
    pub fn certifies(&self, tol: f64) -> bool {
        self.max_abs_qvi() <= tol && self.min_branch() >= -tol
    }
}

/// Evaluates `delta V - A V - G` and `V - M V` on the grid.
pub fn qvi_residuals(vf: &ValueFunction, model: &ModelSpec) -> Result<ResidualReport, ModelError> {
    let qvi = DiscreteQvi::new(model, &vf.grid)?;
    Ok(residuals_for(&qvi, model.delta, &vf.values))
}

pub(crate) fn residuals_for(qvi: &DiscreteQvi, delta: f64, values: &[f64]) -> ResidualReport {
    let n = values.len();
    let mut report = ResidualReport {
        dynkin: Vec::with_capacity(n),
        intervention: Vec::with_capacity(n),
        qvi: Vec::with_capacity(n),
    };
    for j in 0..n {
        let dynkin = delta * values[j] - qvi.generator(values, j) - qvi.utility(j);
        let intervention = values[j] - qvi.apply_intervention_operator(values, j).0;
        report.dynkin.push(dynkin);
        report.intervention.push(intervention);
        report.qvi.push(dynkin.min(intervention));
    }
    report
}
