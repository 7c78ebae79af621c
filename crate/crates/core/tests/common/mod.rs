#![allow(dead_code)]

pub mod oracle;
pub mod stats;

use impulse_maint::io::{parse_model_config, RunConfig};
use impulse_maint::model::Grid;
use impulse_maint::solver::{extract_policy, qvi_residuals, solve, Policy, ResidualReport, ValueFunction};

pub const EXAMPLE_MOMENTS: &str = include_str!("../../../../configs/example_moments.toml");
pub const EXAMPLE_LOG_SPACE: &str = include_str!("../../../../configs/example_log_space.toml");
pub const EXAMPLE_LOG_DIRECT: &str = include_str!("../../../../configs/example_log_direct.toml");
pub const EXPONENTIAL: &str = include_str!("../../../../configs/exponential.toml");
pub const POINT_MASS: &str = include_str!("../../../../configs/point_mass.toml");

pub fn config_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub struct Solved {
    pub config: RunConfig,
    pub grid: Grid,
    pub vf: ValueFunction,
    pub policy: Policy,
    pub residuals: ResidualReport,
}

impl Solved {
    pub fn from_config(config: RunConfig) -> Solved {
        let grid = Grid::build(&config.model, config.h).expect("grid");
        let vf = solve(&config.model, &grid, config.epsilon, config.max_iter).expect("solve");
        let policy = extract_policy(&vf, &config.model, config.region_tol()).expect("policy");
        let residuals = qvi_residuals(&vf, &config.model).expect("residuals");
        Solved {
            config,
            grid,
            vf,
            policy,
            residuals,
        }
    }

    pub fn from_text(text: &str) -> Solved {
        Solved::from_config(parse_model_config(text).expect("config"))
    }

    /// Value at the grid node nearest `r`.
    pub fn value_at(&self, r: f64) -> f64 {
        self.vf.values[self.grid.nearest_node(r)]
    }

    pub fn residual_tol(&self) -> f64 {
        10.0 * self.config.epsilon * (self.config.model.lambda + self.config.model.delta)
    }
}
