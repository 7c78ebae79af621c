//! Jacobi value iteration for the impulse-control QVI
//!
//! ```text
//! min{ delta V - A V - G,  V - M V } = 0   on [0, O],   V(0) = 0
//! ```
//!
//! discretized on a uniform grid. One sweep maps `V_n` to
//!
//! ```text
//! V_{n+1}[j] = max{ (G(r_j) + lambda sum_{i<=j} V_n[j-i] p_i) / (lambda + delta),
//!                   max_{0<=i<=N-j} V_n[j+i] - C(r_j, i h) }
//! ```
//!
//! with node 0 pinned to zero. Starting from `V_0 = 0` the iterates increase
//! monotonically to the fixed point.

mod policy;
mod residuals;

pub use policy::{extract_policy, threshold_policy, Action, Policy, Region};
pub use residuals::{qvi_residuals, ResidualReport};

use thiserror::Error;

use crate::model::{Grid, ModelError, ModelSpec};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver argument: {0}")]
    InvalidArgument(String),
    #[error("no convergence after {iterations} sweeps, last sup-norm gap {last_gap:e}")]
    NonConvergence { iterations: usize, last_gap: f64 },
    #[error("iterate {iteration} decreased at node {node}: {before} -> {after}")]
    NonMonotone {
        iteration: usize,
        node: usize,
        before: f64,
        after: f64,
    },
}

/// The discrete QVI on a fixed grid: utilities, shock weights, and the
/// triangular table of admissible intervention costs.
#[derive(Debug, Clone)]
pub struct DiscreteQvi {
    lambda: f64,
    delta: f64,
    utilities: Vec<f64>,
    density: Vec<f64>,
    /// `costs[j][i] = C(r_j, i h)` for `i <= N - j`.
    costs: Vec<Vec<f64>>,
}

impl DiscreteQvi {
    pub fn new(model: &ModelSpec, grid: &Grid) -> Result<Self, ModelError> {
        let n = grid.intervals();
        let nodes = grid.nodes();
        let utilities = nodes.iter().map(|&r| model.utility(r)).collect::<Result<Vec<_>, _>>()?;
        let costs = (0..=n)
            .map(|j| {
                (0..=n - j)
                    .map(|i| model.cost(nodes[j], nodes[i]))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DiscreteQvi {
            lambda: model.lambda,
            delta: model.delta,
            utilities,
            density: grid.density().to_vec(),
            costs,
        })
    }

    pub fn len(&self) -> usize {
        self.utilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utilities.is_empty()
    }

    pub fn utility(&self, j: usize) -> f64 {
        self.utilities[j]
    }

    pub fn cost(&self, j: usize, steps: usize) -> f64 {
        self.costs[j][steps]
    }

    /// `sum_{i=0}^{j} values[j-i] p_i`, summed left to right over `i`.
    /// Shocks that pass node 0 contribute nothing.
    fn surviving_value(&self, values: &[f64], j: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..=j {
            acc += values[j - i] * self.density[i];
        }
        acc
    }

    /// Value of waiting at node `j`:
    /// `(G(r_j) + lambda sum_i values[j-i] p_i) / (lambda + delta)`.
    pub fn apply_generator_value(&self, values: &[f64], j: usize) -> f64 {
        (self.utilities[j] + self.lambda * self.surviving_value(values, j)) / (self.lambda + self.delta)
    }

    /// Generator of the uncontrolled process at node `j`:
    /// `lambda (sum_i values[j-i] p_i - values[j])`.
    pub fn generator(&self, values: &[f64], j: usize) -> f64 {
        self.lambda * (self.surviving_value(values, j) - values[j])
    }

    /// `MV[j] = max_{0<=i<=N-j} values[j+i] - C(r_j, i h)` and the smallest
    /// maximizing `i`.
    pub fn apply_intervention_operator(&self, values: &[f64], j: usize) -> (f64, usize) {
        let row = &self.costs[j];
        let mut best = values[j] - row[0];
        let mut best_i = 0;
        for (i, c) in row.iter().enumerate().skip(1) {
            let candidate = values[j + i] - c;
            if candidate > best {
                best = candidate;
                best_i = i;
            }
        }
        (best, best_i)
    }

    /// One Jacobi sweep: every node is updated from `values` only.
    pub fn jacobi_sweep(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        self.jacobi_sweep_into(values, &mut out);
        out
    }

    fn jacobi_sweep_into(&self, values: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        for (j, slot) in out.iter_mut().enumerate().skip(1) {
            let wait = self.apply_generator_value(values, j);
            let (act, _) = self.apply_intervention_operator(values, j);
            *slot = wait.max(act);
        }
    }
}

/// Converged value function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub final_gap: f64,
    pub tolerance: f64,
}

impl ValueFunction {
    /// Largest `|V[j+1] - V[j]| / h` over nodes `1..=N`. The jump out of
    /// the failure state is left out.
    pub fn lipschitz_bound(&self) -> f64 {
        let h = self.grid.h();
        self.values
            .get(1..)
            .unwrap_or_default()
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / h)
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation of `V` at `r` in `[0, O]`.
    pub fn interpolate(&self, r: f64) -> f64 {
        let n = self.grid.intervals();
        let x = (r / self.grid.h()).clamp(0.0, n as f64);
        let lo = (x.floor() as usize).min(n.saturating_sub(1));
        let w = x - lo as f64;
        if w == 0.0 || n == 0 {
            self.values[lo]
        } else {
            self.values[lo] + w * (self.values[lo + 1] - self.values[lo])
        }
    }
}

/// Solve from `V_0 = 0`, checking that every sweep is non-decreasing.
pub fn solve(model: &ModelSpec, grid: &Grid, epsilon: f64, max_iter: usize) -> Result<ValueFunction, SolveError> {
    solve_observed(model, grid, epsilon, max_iter, |_, _| {})
}

/// [`solve`] with a callback receiving `(n, V_n)` after each sweep.
pub fn solve_observed(
    model: &ModelSpec,
    grid: &Grid,
    epsilon: f64,
    max_iter: usize,
    observer: impl FnMut(usize, &[f64]),
) -> Result<ValueFunction, SolveError> {
    let initial = vec![0.0; grid.intervals() + 1];
    iterate(model, grid, initial, epsilon, max_iter, true, observer)
}

/// Solve from an arbitrary starting vector. Node 0 is reset to zero.
/// Monotonicity is not checked since it only holds from below.
pub fn solve_from(
    model: &ModelSpec,
    grid: &Grid,
    initial: Vec<f64>,
    epsilon: f64,
    max_iter: usize,
) -> Result<ValueFunction, SolveError> {
    if initial.len() != grid.intervals() + 1 {
        return Err(SolveError::InvalidArgument(format!(
            "initial vector has {} entries, grid has {} nodes",
            initial.len(),
            grid.intervals() + 1
        )));
    }
    iterate(model, grid, initial, epsilon, max_iter, false, |_, _| {})
}

fn iterate(
    model: &ModelSpec,
    grid: &Grid,
    mut values: Vec<f64>,
    epsilon: f64,
    max_iter: usize,
    check_monotone: bool,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<ValueFunction, SolveError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(SolveError::InvalidArgument(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if max_iter == 0 {
        return Err(SolveError::InvalidArgument("max_iter must be at least 1".into()));
    }
    let qvi = DiscreteQvi::new(model, grid)?;
    values[0] = 0.0;
    let mut next = vec![0.0; values.len()];
    let mut gap = f64::INFINITY;
    for n in 1..=max_iter {
        qvi.jacobi_sweep_into(&values, &mut next);
        gap = 0.0;
        for (j, (&old, &new)) in values.iter().zip(next.iter()).enumerate() {
            if check_monotone && new < old {
                return Err(SolveError::NonMonotone {
                    iteration: n,
                    node: j,
                    before: old,
                    after: new,
                });
            }
            gap = f64::max(gap, (new - old).abs());
        }
        std::mem::swap(&mut values, &mut next);
        observer(n, &values);
        if gap < epsilon {
            return Ok(ValueFunction {
                grid: grid.clone(),
                values,
                iterations: n,
                final_gap: gap,
                tolerance: epsilon,
            });
        }
    }
    Err(SolveError::NonConvergence {
        iterations: max_iter,
        last_gap: gap,
    })
}
