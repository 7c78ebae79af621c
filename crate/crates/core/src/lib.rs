//! Optimal condition-based maintenance for a system worn down by compound
//! Poisson shocks.
//!
//! The optimal repair policy solves an impulse-control quasi-variational
//! inequality. [`solver`] computes it by Jacobi value iteration on a grid,
//! [`simulator`] checks any policy by Monte Carlo on the continuous-state
//! process, and [`io`] and [`cli`] handle configs, artifacts and plot data.

pub mod cli;
pub mod io;
pub mod model;
pub mod simulator;
pub mod solver;

pub use model::{CostSpec, Grid, ModelError, ModelSpec, ShockDistribution, UtilitySpec};
pub use simulator::{estimate_profit, sample_path, Controller, SimulationReport, SimulationSettings};
pub use solver::{extract_policy, qvi_residuals, solve, Action, Policy, ResidualReport, ValueFunction};
