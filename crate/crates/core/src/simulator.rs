//! Monte Carlo evaluation of maintenance policies on the controlled shock
//! process.
//!
//! Shocks arrive after `Exp(lambda)` gaps. The controller sees the state at
//! time 0 and right after every shock (and at its own scheduled inspections)
//! and may repair instantly. Utility accrues in closed form between events,
//! `G(r) (e^{-delta t1} - e^{-delta t2}) / delta`, and each repair at `tau`
//! costs `e^{-delta tau} C(r-, zeta)`. A path ends at failure (`r <= 0`) or
//! at the truncation horizon `t_max`, chosen so that everything after it is
//! worth at most `epsilon_tail`.
//!
//! Path `k` of a run draws from `ChaCha8Rng::seed_from_u64(seed)` with its
//! stream set to `k`, so results do not depend on scheduling.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, ModelSpec, ShockDistribution};
use crate::solver::{Action, Policy};

pub const DEFAULT_EPSILON_TAIL: f64 = 1e-6;
pub const DEFAULT_PATHS: usize = 100_000;
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9); key = seed_from_u64(seed); stream = path index";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("initial state {r0} must lie in (0, {ceiling}]")]
    InitialState { r0: f64, ceiling: f64 },
    #[error("policy grid covers [0, {policy}] but the model ceiling is {model}")]
    IncompatiblePolicy { policy: f64, model: f64 },
    #[error("invalid simulation setting: {0}")]
    InvalidSetting(String),
}

/// Decides repairs along a path.
pub trait Controller: Sync {
    /// Repair size chosen on observing state `r` (at time 0 and right after
    /// each shock). `None` means wait.
    fn on_observation(&self, r: f64) -> Option<f64>;

    /// First scheduled inspection strictly after `t`.
    fn next_inspection(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Repair size chosen at a scheduled inspection.
    fn on_inspection(&self, r: f64) -> Option<f64> {
        self.on_observation(r)
    }

    fn check_compatible(&self, _model: &ModelSpec) -> Result<(), SimError> {
        Ok(())
    }
}

impl Controller for Policy {
    fn on_observation(&self, r: f64) -> Option<f64> {
        match self.action_at(r) {
            Action::Intervene { zeta, .. } => Some(zeta),
            _ => None,
        }
    }

    fn check_compatible(&self, model: &ModelSpec) -> Result<(), SimError> {
        if (self.ceiling() - model.ceiling).abs() > 1e-9 * model.ceiling.max(1.0) {
            return Err(SimError::IncompatiblePolicy {
                policy: self.ceiling(),
                model: model.ceiling,
            });
        }
        Ok(())
    }
}

/// Never repairs.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoNothing;

impl Controller for DoNothing {
    fn on_observation(&self, _r: f64) -> Option<f64> {
        None
    }
}

/// Inspects at `period, 2 period, ...` and restores the state to `target`
/// whenever it is below. Ignores shocks otherwise.
#[derive(Debug, Clone, Copy)]
pub struct PeriodicRenewal {
    pub period: f64,
    pub target: f64,
}

impl Controller for PeriodicRenewal {
    fn on_observation(&self, _r: f64) -> Option<f64> {
        None
    }

    fn next_inspection(&self, t: f64) -> Option<f64> {
        Some(((t / self.period).floor() + 1.0) * self.period)
    }

    fn on_inspection(&self, r: f64) -> Option<f64> {
        (r < self.target).then_some(self.target - r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Shock {
        size: f64,
    },
    Intervention {
        zeta: f64,
        cost: f64,
    },
    /// The shock that took the state to or below zero.
    Failure {
        size: f64,
    },
}

/// One event on a simulated path. A repair triggered by a shock shares the
/// shock's time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEvent {
    pub time: f64,
    pub kind: EventKind,
    pub state_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub discounted_profit: f64,
    /// Failure time, or `t_max` for paths that survive the horizon.
    pub lifetime: f64,
    pub failed: bool,
    pub interventions: usize,
    /// A repair left the state where the controller would repair again.
    pub flagged: bool,
    pub events: Vec<PathEvent>,
}

/// Horizon past which discounted utility is worth at most `epsilon_tail`:
/// `t_max = ln(G(O) / (delta epsilon_tail)) / delta`.
pub fn horizon(model: &ModelSpec, epsilon_tail: f64) -> f64 {
    let ratio = model.max_utility() / (model.delta * epsilon_tail);
    if ratio <= 1.0 {
        0.0
    } else {
        ratio.ln() / model.delta
    }
}

/// Random stream for path `k`.
pub fn path_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

enum SizeSampler {
    LogNormal(LogNormal<f64>),
    Exponential(Exp<f64>),
    Table { sizes: Vec<f64>, index: WeightedIndex<f64> },
}

impl SizeSampler {
    fn new(shocks: &ShockDistribution) -> Result<Self, ModelError> {
        shocks.validate()?;
        let bad = |e: String| ModelError::InvalidParameter {
            name: "shocks",
            reason: e,
        };
        Ok(match shocks {
            ShockDistribution::LogNormal { location, scale } => {
                SizeSampler::LogNormal(LogNormal::new(*location, *scale).map_err(|e| bad(e.to_string()))?)
            }
            ShockDistribution::Exponential { rate } => {
                SizeSampler::Exponential(Exp::new(*rate).map_err(|e| bad(e.to_string()))?)
            }
            ShockDistribution::Tabulated { atoms } => SizeSampler::Table {
                sizes: atoms.iter().map(|a| a.0).collect(),
                index: WeightedIndex::new(atoms.iter().map(|a| a.1)).map_err(|e| bad(e.to_string()))?,
            },
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SizeSampler::LogNormal(d) => d.sample(rng),
            SizeSampler::Exponential(d) => d.sample(rng),
            SizeSampler::Table { sizes, index } => sizes[index.sample(rng)],
        }
    }
}

struct Dynamics<'m> {
    model: &'m ModelSpec,
    arrivals: Option<Exp<f64>>,
    sizes: SizeSampler,
}

impl<'m> Dynamics<'m> {
    fn new(model: &'m ModelSpec) -> Result<Self, SimError> {
        model.validate()?;
        let arrivals = if model.lambda > 0.0 {
            Some(Exp::new(model.lambda).map_err(|e| {
                SimError::Model(ModelError::InvalidParameter {
                    name: "lambda",
                    reason: e.to_string(),
                })
            })?)
        } else {
            None
        };
        Ok(Dynamics {
            model,
            arrivals,
            sizes: SizeSampler::new(&model.shocks)?,
        })
    }

    fn gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.arrivals {
            Some(exp) => exp.sample(rng),
            None => f64::INFINITY,
        }
    }

    fn check_initial(&self, r0: f64) -> Result<(), SimError> {
        if !(r0 > 0.0 && r0 <= self.model.ceiling) {
            return Err(SimError::InitialState {
                r0,
                ceiling: self.model.ceiling,
            });
        }
        Ok(())
    }

    fn run<C: Controller + ?Sized, R: Rng + ?Sized>(
        &self,
        controller: &C,
        r0: f64,
        rng: &mut R,
        t_max: f64,
        record: bool,
    ) -> Result<PathOutcome, SimError> {
        let delta = self.model.delta;
        let ceiling = self.model.ceiling;
        let mut out = PathOutcome {
            discounted_profit: 0.0,
            lifetime: t_max,
            failed: false,
            interventions: 0,
            flagged: false,
            events: Vec::new(),
        };
        let mut t = 0.0;
        let mut r = r0;

        let repair = |out: &mut PathOutcome, r: &mut f64, t: f64, zeta: Option<f64>, observed: bool| {
            let Some(zeta) = zeta else {
                return Ok::<(), SimError>(());
            };
            let zeta = zeta.min(ceiling - *r);
            if zeta <= 0.0 {
                return Ok(());
            }
            let cost = self.model.cost(*r, zeta)?;
            out.discounted_profit -= (-delta * t).exp() * cost;
            *r = (*r + zeta).min(ceiling);
            out.interventions += 1;
            if observed && controller.on_observation(*r).is_some() {
                out.flagged = true;
            }
            if record {
                out.events.push(PathEvent {
                    time: t,
                    kind: EventKind::Intervention { zeta, cost },
                    state_after: *r,
                });
            }
            Ok(())
        };

        let decision = controller.on_observation(r);
        repair(&mut out, &mut r, t, decision, true)?;
        let mut next_shock = self.gap(rng);
        loop {
            let next_inspection = controller.next_inspection(t).unwrap_or(f64::INFINITY);
            let t_next = next_shock.min(next_inspection);
            if t_next >= t_max {
                out.discounted_profit += self.accrued(r, t, t_max)?;
                return Ok(out);
            }
            out.discounted_profit += self.accrued(r, t, t_next)?;
            t = t_next;
            if next_inspection < next_shock {
                let decision = controller.on_inspection(r);
                repair(&mut out, &mut r, t, decision, false)?;
                continue;
            }
            let size = self.sizes.sample(rng);
            r -= size;
            next_shock = t + self.gap(rng);
            if r <= 0.0 {
                out.failed = true;
                out.lifetime = t;
                if record {
                    out.events.push(PathEvent {
                        time: t,
                        kind: EventKind::Failure { size },
                        state_after: r,
                    });
                }
                return Ok(out);
            }
            if record {
                out.events.push(PathEvent {
                    time: t,
                    kind: EventKind::Shock { size },
                    state_after: r,
                });
            }
            let decision = controller.on_observation(r);
            repair(&mut out, &mut r, t, decision, true)?;
        }
    }

    /// `G(r) (e^{-delta t1} - e^{-delta t2}) / delta`.
    fn accrued(&self, r: f64, t1: f64, t2: f64) -> Result<f64, SimError> {
        let delta = self.model.delta;
        let g = self.model.utility(r)?;
        Ok(g * (-delta * t1).exp() * -(-delta * (t2 - t1)).exp_m1() / delta)
    }
}

/// Simulates one controlled path from `r0` up to failure or `t_max`.
pub fn sample_path<C: Controller + ?Sized, R: Rng + ?Sized>(
    model: &ModelSpec,
    controller: &C,
    r0: f64,
    rng: &mut R,
    t_max: f64,
) -> Result<PathOutcome, SimError> {
    controller.check_compatible(model)?;
    let dynamics = Dynamics::new(model)?;
    dynamics.check_initial(r0)?;
    dynamics.run(controller, r0, rng, t_max, true)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    pub paths: usize,
    pub seed: u64,
    pub epsilon_tail: f64,
    pub parallel: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            paths: DEFAULT_PATHS,
            seed: 0,
            epsilon_tail: DEFAULT_EPSILON_TAIL,
            parallel: true,
        }
    }
}

impl SimulationSettings {
    fn validate(&self) -> Result<(), SimError> {
        if self.paths < 2 {
            return Err(SimError::InvalidSetting(format!(
                "need at least 2 paths, got {}",
                self.paths
            )));
        }
        if !(self.epsilon_tail.is_finite() && self.epsilon_tail > 0.0) {
            return Err(SimError::InvalidSetting(format!(
                "epsilon_tail must be > 0, got {}",
                self.epsilon_tail
            )));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of the expected discounted profit from `r0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub initial_state: f64,
    pub paths: usize,
    pub seed: u64,
    pub mean_profit: f64,
    pub std_error: f64,
    /// Mean of `min(failure time, t_max)`.
    pub mean_lifetime: f64,
    /// Paths still alive at `t_max`.
    pub capped_paths: usize,
    pub interventions_per_path: f64,
    /// Paths where a repair landed in a state that asks for another repair.
    pub flagged_paths: usize,
    pub discount_truncation_bound: f64,
    pub horizon: f64,
    pub rng: String,
}

impl fmt::Display for SimulationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "initial_state={}", self.initial_state)?;
        writeln!(f, "paths={}", self.paths)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "mean_profit={}", self.mean_profit)?;
        writeln!(f, "std_error={}", self.std_error)?;
        writeln!(f, "mean_lifetime={}", self.mean_lifetime)?;
        writeln!(f, "capped_paths={}", self.capped_paths)?;
        writeln!(f, "interventions_per_path={}", self.interventions_per_path)?;
        writeln!(f, "flagged_paths={}", self.flagged_paths)?;
        writeln!(f, "discount_truncation_bound={}", self.discount_truncation_bound)?;
        writeln!(f, "horizon={}", self.horizon)?;
        write!(f, "rng={}", self.rng)
    }
}

/// Sum in a fixed pairwise order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().fold(0.0, |acc, x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let squares: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let variance = pairwise_sum(&squares) / (n - 1.0);
    (mean, (variance / n).sqrt())
}

fn run_paths<T: Send>(
    paths: usize,
    parallel: bool,
    f: impl Fn(u64) -> Result<T, SimError> + Sync + Send,
) -> Result<Vec<T>, SimError> {
    if parallel {
        (0..paths as u64).into_par_iter().map(f).collect()
    } else {
        (0..paths as u64).map(f).collect()
    }
}

/// Averages `settings.paths` independent paths.
pub fn estimate_profit<C: Controller + ?Sized>(
    model: &ModelSpec,
    controller: &C,
    r0: f64,
    settings: &SimulationSettings,
) -> Result<SimulationReport, SimError> {
    settings.validate()?;
    controller.check_compatible(model)?;
    let dynamics = Dynamics::new(model)?;
    dynamics.check_initial(r0)?;
    let t_max = horizon(model, settings.epsilon_tail);
    let seed = settings.seed;
    let outcomes = run_paths(settings.paths, settings.parallel, |k| {
        let mut rng = path_rng(seed, k);
        dynamics.run(controller, r0, &mut rng, t_max, false)
    })?;

    let profits: Vec<f64> = outcomes.iter().map(|o| o.discounted_profit).collect();
    let lifetimes: Vec<f64> = outcomes.iter().map(|o| o.lifetime).collect();
    let repairs: Vec<f64> = outcomes.iter().map(|o| o.interventions as f64).collect();
    let (mean_profit, std_error) = mean_and_std_error(&profits);
    let n = settings.paths as f64;
    Ok(SimulationReport {
        initial_state: r0,
        paths: settings.paths,
        seed,
        mean_profit,
        std_error,
        mean_lifetime: pairwise_sum(&lifetimes) / n,
        capped_paths: outcomes.iter().filter(|o| !o.failed).count(),
        interventions_per_path: pairwise_sum(&repairs) / n,
        flagged_paths: outcomes.iter().filter(|o| o.flagged).count(),
        discount_truncation_bound: settings.epsilon_tail,
        horizon: t_max,
        rng: RNG_ALGORITHM.to_string(),
    })
}

/// Failure time of the uncontrolled process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeSummary {
    pub paths: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `(level, value)` pairs, nearest-rank.
    pub quantiles: Vec<(f64, f64)>,
}

impl fmt::Display for LifetimeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lifetime_paths={}", self.paths)?;
        writeln!(f, "lifetime_mean={}", self.mean)?;
        write!(f, "lifetime_std_error={}", self.std_error)?;
        for (q, v) in &self.quantiles {
            write!(f, "\nlifetime_q{:02}={}", (q * 100.0).round() as u32, v)?;
        }
        Ok(())
    }
}

/// Runs the shock process with no repairs until `R <= 0` on every path.
pub fn uncontrolled_failure_time_stats(
    model: &ModelSpec,
    r0: f64,
    paths: usize,
    seed: u64,
    parallel: bool,
) -> Result<LifetimeSummary, SimError> {
    if paths < 2 {
        return Err(SimError::InvalidSetting(format!("need at least 2 paths, got {paths}")));
    }
    let dynamics = Dynamics::new(model)?;
    dynamics.check_initial(r0)?;
    if dynamics.arrivals.is_none() {
        return Err(SimError::InvalidSetting(
            "the uncontrolled process never fails without shocks".into(),
        ));
    }
    let mut lifetimes = run_paths(paths, parallel, |k| {
        let mut rng = path_rng(seed, k);
        let (mut t, mut r) = (0.0, r0);
        while r > 0.0 {
            t += dynamics.gap(&mut rng);
            r -= dynamics.sizes.sample(&mut rng);
        }
        Ok(t)
    })?;
    let (mean, std_error) = mean_and_std_error(&lifetimes);
    lifetimes.sort_by(f64::total_cmp);
    let quantiles = [0.1, 0.5, 0.9]
        .iter()
        .map(|&q| {
            let rank = ((q * paths as f64).ceil() as usize).clamp(1, paths);
            (q, lifetimes[rank - 1])
        })
        .collect();
    Ok(LifetimeSummary {
        paths,
        mean,
        std_error,
        quantiles,
    })
}
