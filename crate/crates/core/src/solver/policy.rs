use serde::{Deserialize, Serialize};

use super::{DiscreteQvi, ValueFunction};
use crate::model::{nearest_index, ModelError, ModelSpec};

/// Decision at a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    /// Node 0. The process has stopped.
    Cemetery,
    NoIntervention,
    /// Repair by `zeta = steps * h`, landing on `target`.
    Intervene {
        steps: usize,
        zeta: f64,
        target: f64,
    },
}

/// Which side of the QVI is active at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Intervention region, `V = MV`.
    A,
    /// Continuation region, `V > MV`.
    B,
    #[serde(rename = "cemetery")]
    Cemetery,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::A => "A",
            Region::B => "B",
            Region::Cemetery => "cemetery",
        }
    }
}

impl Action {
    pub fn region(&self) -> Region {
        match self {
            Action::Cemetery => Region::Cemetery,
            Action::NoIntervention => Region::B,
            Action::Intervene { .. } => Region::A,
        }
    }

    pub fn zeta(&self) -> f64 {
        match self {
            Action::Intervene { zeta, .. } => *zeta,
            _ => 0.0,
        }
    }
}

/// A stationary grid policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    h: f64,
    actions: Vec<Action>,
}

impl Policy {
    /// `actions[j]` is the decision at `r_j = j h`.
    pub fn new(h: f64, actions: Vec<Action>) -> Result<Self, ModelError> {
        if actions.len() < 2 || !(h.is_finite() && h > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "policy",
                reason: "needs a positive spacing and at least two nodes".into(),
            });
        }
        let n = actions.len() - 1;
        for (j, a) in actions.iter().enumerate() {
            if let Action::Intervene { steps, .. } = a {
                if *steps == 0 || j + steps > n {
                    return Err(ModelError::InvalidParameter {
                        name: "policy",
                        reason: format!("node {j} targets node {} outside 1..={n}", j + steps),
                    });
                }
            }
        }
        Ok(Policy { h, actions })
    }

    pub fn do_nothing(h: f64, intervals: usize) -> Self {
        let mut actions = vec![Action::NoIntervention; intervals + 1];
        actions[0] = Action::Cemetery;
        Policy { h, actions }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn intervals(&self) -> usize {
        self.actions.len() - 1
    }

    pub fn ceiling(&self) -> f64 {
        self.h * self.intervals() as f64
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Node used to look up the action for a continuous state.
    /// Exact midpoints go to the lower node.
    pub fn node_for(&self, r: f64) -> usize {
        nearest_index(r / self.h, self.intervals())
    }

    /// Action for a continuous state, by nearest-node lookup.
    pub fn action_at(&self, r: f64) -> Action {
        self.actions[self.node_for(r)]
    }

    /// Largest node such that every node in `1..=it` intervenes; 0 when
    /// node 1 already waits.
    pub fn boundary(&self) -> f64 {
        let last = self
            .actions
            .iter()
            .skip(1)
            .take_while(|a| matches!(a, Action::Intervene { .. }))
            .count();
        last as f64 * self.h
    }

    /// Moves every repair target by `shift` (rounded to whole steps), keeping
    /// at least one step and staying under the ceiling.
    pub fn with_shifted_targets(&self, shift: f64) -> Policy {
        let n = self.intervals();
        let delta_steps = (shift / self.h).round() as i64;
        let actions = self
            .actions
            .iter()
            .enumerate()
            .map(|(j, a)| match *a {
                Action::Intervene { steps, .. } => {
                    let steps = (steps as i64 + delta_steps).clamp(1, (n - j) as i64) as usize;
                    Action::Intervene {
                        steps,
                        zeta: steps as f64 * self.h,
                        target: (j + steps) as f64 * self.h,
                    }
                }
                other => other,
            })
            .collect();
        Policy { h: self.h, actions }
    }
}

/// Reads the policy off a converged value function: node `j >= 1` intervenes
/// iff `V[j] - MV[j] <= region_tol`, repairing by the smallest maximizer.
pub fn extract_policy(vf: &ValueFunction, model: &ModelSpec, region_tol: f64) -> Result<Policy, ModelError> {
    let qvi = DiscreteQvi::new(model, &vf.grid)?;
    let h = vf.grid.h();
    let n = vf.grid.intervals();
    let actions = (0..=n)
        .map(|j| {
            if j == 0 {
                return Action::Cemetery;
            }
            let (mv, steps) = qvi.apply_intervention_operator(&vf.values, j);
            if vf.values[j] - mv <= region_tol && steps > 0 {
                Action::Intervene {
                    steps,
                    zeta: vf.grid.node(steps),
                    target: vf.grid.node(j + steps),
                }
            } else {
                Action::NoIntervention
            }
        })
        .collect();
    Policy::new(h, actions)
}

/// Threshold rule: every node with `r_j <= boundary` repairs by the
/// maximizer of the intervention operator, all others wait.
pub fn threshold_policy(vf: &ValueFunction, model: &ModelSpec, boundary: f64) -> Result<Policy, ModelError> {
    let qvi = DiscreteQvi::new(model, &vf.grid)?;
    let n = vf.grid.intervals();
    let last = if boundary < 0.0 {
        0
    } else {
        ((boundary / vf.grid.h()).round() as usize).min(n)
    };
    let actions = (0..=n)
        .map(|j| {
            if j == 0 {
                return Action::Cemetery;
            }
            let (_, steps) = qvi.apply_intervention_operator(&vf.values, j);
            if j <= last && steps > 0 {
                Action::Intervene {
                    steps,
                    zeta: vf.grid.node(steps),
                    target: vf.grid.node(j + steps),
                }
            } else {
                Action::NoIntervention
            }
        })
        .collect();
    Policy::new(vf.grid.h(), actions)
}
