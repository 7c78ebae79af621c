//! Problem instance for a system losing performance to compound Poisson shocks.
//!
//! The state `r` lives in `[0, O]` where `O` is the ceiling (as-good-as-new)
//! and `0` is the failure threshold. Shocks arrive at rate `lambda` and each
//! removes an i.i.d. amount drawn from a [`ShockDistribution`]. The operator
//! earns utility at rate `G(r)` and may repair by `zeta` at cost `C(r, zeta)`.
//! Everything is discounted at rate `delta`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Failure threshold. States at or below it are absorbed.
pub const FAILURE_THRESHOLD: f64 = 0.0;

const PROBABILITY_SUM_TOL: f64 = 1e-12;
const CONCAVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("state {r} lies outside [0, {ceiling}]")]
    Domain { r: f64, ceiling: f64 },
    #[error("intervention of size {zeta} from state {r} would exceed the ceiling {ceiling}")]
    Inadmissible { r: f64, zeta: f64, ceiling: f64 },
    #[error("grid spacing {h} does not divide the ceiling {ceiling} into a whole number of intervals")]
    GridSpacing { h: f64, ceiling: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Law of a single shock size, in state units. Support is `(0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShockDistribution {
    /// `ln S ~ Normal(location, scale^2)`.
    LogNormal {
        location: f64,
        scale: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Finitely many atoms `(size, probability)`.
    Tabulated {
        atoms: Vec<(f64, f64)>,
    },
}

impl ShockDistribution {
    /// Lognormal with the given mean and standard deviation of the shock size
    /// itself (not of its logarithm).
    pub fn lognormal_from_moments(mean: f64, sd: f64) -> Result<Self, ModelError> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(invalid("mean", format!("must be finite and > 0, got {mean}")));
        }
        if !(sd.is_finite() && sd > 0.0) {
            return Err(invalid("sd", format!("must be finite and > 0, got {sd}")));
        }
        let variance_log = (1.0 + (sd / mean).powi(2)).ln();
        let dist = ShockDistribution::LogNormal {
            location: mean.ln() - 0.5 * variance_log,
            scale: variance_log.sqrt(),
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ShockDistribution::LogNormal { location, scale } => {
                if !location.is_finite() {
                    return Err(invalid("location", format!("must be finite, got {location}")));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(invalid("scale", format!("must be finite and > 0, got {scale}")));
                }
            }
            ShockDistribution::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(invalid("rate", format!("must be finite and > 0, got {rate}")));
                }
            }
            ShockDistribution::Tabulated { atoms } => {
                if atoms.is_empty() {
                    return Err(invalid("atoms", "at least one atom is required"));
                }
                let mut total = 0.0;
                for &(size, prob) in atoms {
                    if !(size.is_finite() && size > 0.0) {
                        return Err(invalid(
                            "atoms",
                            format!("shock sizes must be finite and > 0, got {size}"),
                        ));
                    }
                    if !(prob.is_finite() && prob >= 0.0) {
                        return Err(invalid(
                            "atoms",
                            format!("probabilities must be finite and >= 0, got {prob}"),
                        ));
                    }
                    total += prob;
                }
                if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(invalid("atoms", format!("probabilities sum to {total}, expected 1")));
                }
            }
        }
        Ok(())
    }

    /// `P(S <= x)`. Zero for `x <= 0`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            ShockDistribution::LogNormal { location, scale } => {
                0.5 * erfc(-(x.ln() - location) / (scale * std::f64::consts::SQRT_2))
            }
            ShockDistribution::Exponential { rate } => -(-rate * x).exp_m1(),
            ShockDistribution::Tabulated { atoms } => atoms
                .iter()
                .filter(|(size, _)| *size <= x)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ShockDistribution::LogNormal { location, scale } => (location + 0.5 * scale * scale).exp(),
            ShockDistribution::Exponential { rate } => 1.0 / rate,
            ShockDistribution::Tabulated { atoms } => atoms.iter().map(|(s, p)| s * p).sum(),
        }
    }
}

/// Utility rate `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// `G(r) = (scale / alpha) (1 - exp(-alpha r))`.
    ExponentialAversion { scale: f64, alpha: f64 },
    /// Values at `values.len()` equally spaced nodes over `[0, O]`,
    /// linearly interpolated in between.
    Tabulated { values: Vec<f64> },
}

impl UtilitySpec {
    fn validate(&self) -> Result<(), ModelError> {
        match self {
            UtilitySpec::ExponentialAversion { scale, alpha } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(invalid(
                        "utility.scale",
                        format!("must be finite and >= 0, got {scale}"),
                    ));
                }
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(invalid("utility.alpha", format!("must be finite and > 0, got {alpha}")));
                }
            }
            UtilitySpec::Tabulated { values } => {
                if values.len() < 2 {
                    return Err(invalid("utility.values", "at least two nodes are required"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("utility.values", "values must be finite"));
                }
                if values[0] != 0.0 {
                    return Err(ModelError::Invariant(format!(
                        "utility must vanish at the failure threshold, G(0) = {}",
                        values[0]
                    )));
                }
            }
        }
        Ok(())
    }

    /// `G(r)` for `r` in `[0, ceiling]`.
    pub fn evaluate(&self, r: f64, ceiling: f64) -> Result<f64, ModelError> {
        if !(r.is_finite() && (0.0..=ceiling).contains(&r)) {
            return Err(ModelError::Domain { r, ceiling });
        }
        Ok(match self {
            UtilitySpec::ExponentialAversion { scale, alpha } => -scale / alpha * (-alpha * r).exp_m1(),
            UtilitySpec::Tabulated { values } => {
                let n = values.len() - 1;
                let x = r / ceiling * n as f64;
                let lo = (x.floor() as usize).min(n - 1);
                let w = x - lo as f64;
                if w == 0.0 {
                    values[lo]
                } else {
                    values[lo] + w * (values[lo + 1] - values[lo])
                }
            }
        })
    }
}

/// Intervention cost `C(r, zeta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// `C(r, zeta) = r + zeta^2 + fixed`.
    Quadratic { fixed: f64 },
    /// `rows[j][i] = C(r_j, i h)` on a table grid with `rows.len() - 1`
    /// intervals over `[0, O]`; row `j` has `rows.len() - j` entries.
    /// Off-table arguments use the nearest table node.
    Tabulated { rows: Vec<Vec<f64>> },
}

impl CostSpec {
    fn validate(&self) -> Result<(), ModelError> {
        match self {
            CostSpec::Quadratic { fixed } => {
                if !fixed.is_finite() {
                    return Err(invalid("cost.fixed", format!("must be finite, got {fixed}")));
                }
                // C(0, 0) = fixed, so strict positivity needs fixed > 0.
                if *fixed <= 0.0 {
                    return Err(ModelError::Invariant(format!(
                        "intervention cost must be strictly positive, fixed cost is {fixed}"
                    )));
                }
            }
            CostSpec::Tabulated { rows } => {
                let n = rows.len();
                if n < 2 {
                    return Err(invalid("cost.rows", "at least two rows are required"));
                }
                for (j, row) in rows.iter().enumerate() {
                    if row.len() != n - j {
                        return Err(invalid(
                            "cost.rows",
                            format!("row {j} has {} entries, expected {}", row.len(), n - j),
                        ));
                    }
                    if row.iter().any(|c| !c.is_finite()) {
                        return Err(invalid("cost.rows", "entries must be finite"));
                    }
                }
            }
        }
        Ok(())
    }

    /// `C(r, zeta)`; errors if `r + zeta` exceeds the ceiling.
    pub fn evaluate(&self, r: f64, zeta: f64, ceiling: f64) -> Result<f64, ModelError> {
        if !(r.is_finite() && (0.0..=ceiling).contains(&r)) {
            return Err(ModelError::Domain { r, ceiling });
        }
        if !(zeta.is_finite() && zeta >= 0.0) || zeta > ceiling - r + admissibility_slack(ceiling) {
            return Err(ModelError::Inadmissible { r, zeta, ceiling });
        }
        Ok(match self {
            CostSpec::Quadratic { fixed } => r + zeta * zeta + fixed,
            CostSpec::Tabulated { rows } => {
                let n = rows.len() - 1;
                let step = ceiling / n as f64;
                let j = nearest_index(r / step, n);
                let i = nearest_index(zeta / step, n - j);
                rows[j][i]
            }
        })
    }
}

fn admissibility_slack(ceiling: f64) -> f64 {
    1e-12 * ceiling.max(1.0)
}

/// Index of the nearest node for a fractional position `x`, ties to the
/// lower node, clamped to `[0, max]`.
pub(crate) fn nearest_index(x: f64, max: usize) -> usize {
    if x <= 0.0 {
        return 0;
    }
    let lower = x.floor();
    let idx = if x - lower > 0.5 { lower + 1.0 } else { lower };
    (idx as usize).min(max)
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Shock arrival rate. Zero is accepted as the shock-free limit.
    pub lambda: f64,
    /// Discount rate.
    pub delta: f64,
    /// Best attainable state `O`.
    pub ceiling: f64,
    pub shocks: ShockDistribution,
    pub utility: UtilitySpec,
    pub cost: CostSpec,
}

impl ModelSpec {
    pub fn new(
        lambda: f64,
        delta: f64,
        ceiling: f64,
        shocks: ShockDistribution,
        utility: UtilitySpec,
        cost: CostSpec,
    ) -> Result<Self, ModelError> {
        let model = ModelSpec {
            lambda,
            delta,
            ceiling,
            shocks,
            utility,
            cost,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid(
                "lambda",
                format!("must be finite and >= 0, got {}", self.lambda),
            ));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(invalid(
                "delta",
                format!(
                    "must be finite and > 0 for the value to stay bounded, got {}",
                    self.delta
                ),
            ));
        }
        if !(self.ceiling.is_finite() && self.ceiling > 0.0) {
            return Err(invalid(
                "ceiling",
                format!("must be finite and > 0, got {}", self.ceiling),
            ));
        }
        self.shocks.validate()?;
        self.utility.validate()?;
        self.cost.validate()
    }

    pub fn utility(&self, r: f64) -> Result<f64, ModelError> {
        self.utility.evaluate(r, self.ceiling)
    }

    pub fn cost(&self, r: f64, zeta: f64) -> Result<f64, ModelError> {
        self.cost.evaluate(r, zeta, self.ceiling)
    }

    /// `G(O)`, the largest utility rate.
    pub fn max_utility(&self) -> f64 {
        self.utility
            .evaluate(self.ceiling, self.ceiling)
            .expect("ceiling is always in the domain")
    }

    /// `G(O) / delta`: utility at the best state forever, with no shocks and
    /// no costs. Upper bound for the value function.
    pub fn value_upper_bound(&self) -> f64 {
        self.max_utility() / self.delta
    }
}

/// Number of intervals `O / h`, if `h` divides the ceiling.
pub fn intervals_for(ceiling: f64, h: f64) -> Result<usize, ModelError> {
    if !(h.is_finite() && h > 0.0 && h <= ceiling) {
        return Err(ModelError::GridSpacing { h, ceiling });
    }
    let ratio = ceiling / h;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(ModelError::GridSpacing { h, ceiling });
    }
    Ok(n as usize)
}

/// Midpoint-binned shock weights `p_0..=p_N`.
///
/// `p_0 = F(h/2)` and `p_i = F((i + 1/2) h) - F((i - 1/2) h)`. The missing
/// mass `1 - F((N + 1/2) h)` is shocks that clear the whole grid.
pub fn discretize_shock_density(shocks: &ShockDistribution, h: f64, intervals: usize) -> Vec<f64> {
    let mut density = Vec::with_capacity(intervals + 1);
    let mut prev = shocks.cdf(0.5 * h);
    density.push(prev);
    for i in 1..=intervals {
        let next = shocks.cdf((i as f64 + 0.5) * h);
        density.push((next - prev).max(0.0));
        prev = next;
    }
    density
}

/// Uniform discretization of `[0, O]` with the binned shock law.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    h: f64,
    nodes: Vec<f64>,
    density: Vec<f64>,
}

impl Grid {
    /// Builds the grid and checks the utility and cost invariants on its nodes.
    pub fn build(model: &ModelSpec, h: f64) -> Result<Grid, ModelError> {
        model.validate()?;
        let n = intervals_for(model.ceiling, h)?;
        let h = model.ceiling / n as f64;
        let nodes: Vec<f64> = (0..=n)
            .map(|j| if j == n { model.ceiling } else { j as f64 * h })
            .collect();
        let density = discretize_shock_density(&model.shocks, h, n);
        let grid = Grid { h, nodes, density };
        grid.check_utility(model)?;
        grid.check_cost(model)?;
        Ok(grid)
    }

    fn check_utility(&self, model: &ModelSpec) -> Result<(), ModelError> {
        let g: Vec<f64> = self.nodes.iter().map(|&r| model.utility(r)).collect::<Result<_, _>>()?;
        if g[0] != 0.0 {
            return Err(ModelError::Invariant(format!("G(0) must be 0, got {}", g[0])));
        }
        for j in 0..g.len() - 1 {
            if g[j + 1] < g[j] {
                return Err(ModelError::Invariant(format!(
                    "utility must be non-decreasing, G({}) = {} > G({}) = {}",
                    self.nodes[j],
                    g[j],
                    self.nodes[j + 1],
                    g[j + 1]
                )));
            }
        }
        for j in 1..g.len() - 1 {
            let second = g[j + 1] - 2.0 * g[j] + g[j - 1];
            if second > CONCAVITY_TOL {
                return Err(ModelError::Invariant(format!(
                    "utility must be concave, second difference {second} at r = {}",
                    self.nodes[j]
                )));
            }
        }
        Ok(())
    }

    fn check_cost(&self, model: &ModelSpec) -> Result<(), ModelError> {
        let n = self.intervals();
        let table: Vec<Vec<f64>> = (0..=n)
            .map(|j| {
                (0..=n - j)
                    .map(|i| model.cost(self.nodes[j], self.nodes[i]))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        for j in 0..=n {
            for i in 0..=n - j {
                let c = table[j][i];
                if c.is_nan() || c <= 0.0 {
                    return Err(ModelError::Invariant(format!(
                        "intervention cost must be > 0, C({}, {}) = {c}",
                        self.nodes[j], self.nodes[i]
                    )));
                }
                if i < n - j && table[j][i + 1] < c {
                    return Err(ModelError::Invariant(format!(
                        "cost must be non-decreasing in the intervention size at r = {}",
                        self.nodes[j]
                    )));
                }
                if j < n && i < n - j && table[j + 1][i] < c {
                    return Err(ModelError::Invariant(format!(
                        "cost must be non-decreasing in the state at zeta = {}",
                        self.nodes[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `N`, the number of intervals.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn ceiling(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Binned shock weights `p_0..=p_N`.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Nearest node to `r`; exact midpoints go to the lower node.
    pub fn nearest_node(&self, r: f64) -> usize {
        nearest_index(r / self.h, self.intervals())
    }
}
