//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain or validation error, 2 solver did not
//! converge, 3 I/O error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::io::{export_plot_data, load_artifact, parse_model_config, save_artifact, PlotData, RunArtifact, RunConfig};
use crate::model::{intervals_for, Grid};
use crate::simulator::{
    estimate_profit, uncontrolled_failure_time_stats, DoNothing, SimulationSettings, DEFAULT_EPSILON_TAIL,
    DEFAULT_PATHS,
};
use crate::solver::{extract_policy, qvi_residuals, solve, threshold_policy, Action, Policy, SolveError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NON_CONVERGENCE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "impulse-maint",
    version,
    about = "Optimal repair policies for systems degraded by random shocks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the model and write a run artifact.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid spacing; must divide the ceiling.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Store the solve wall time (makes the artifact non-reproducible).
        #[arg(long)]
        record_wall_time: bool,
    },
    /// Look up the decision and value at a state.
    Query {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        state: f64,
    },
    /// Monte Carlo estimate of the expected discounted profit.
    Simulate {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        state: f64,
        #[arg(long, default_value_t = DEFAULT_PATHS)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// solved, none, or shifted:<d> (boundary moved by d)
        #[arg(long, default_value = "solved")]
        policy: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON_TAIL)]
        epsilon_tail: f64,
        /// Run paths on one thread.
        #[arg(long)]
        serial: bool,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plot data as CSV.
    Export {
        #[arg(long)]
        artifact: PathBuf,
        /// value_function, policy, or residuals
        #[arg(long)]
        which: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Result of one command: exit code plus what goes to stdout and stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutcome {
    fn ok(stdout: String) -> Self {
        CommandOutcome {
            exit_code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(exit_code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        CommandOutcome {
            exit_code,
            stdout: String::new(),
            stderr,
        }
    }
}

type CmdResult = Result<String, CommandOutcome>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                CommandOutcome::ok(text)
            } else {
                CommandOutcome::fail(code, text)
            };
        }
    };
    let result = match cli.command {
        Command::Solve {
            config,
            out,
            h,
            epsilon,
            max_iter,
            record_wall_time,
        } => cmd_solve(&config, &out, h, epsilon, max_iter, record_wall_time),
        Command::Query { artifact, state } => cmd_query(&artifact, state),
        Command::Simulate {
            artifact,
            state,
            paths,
            seed,
            policy,
            epsilon_tail,
            serial,
            out,
        } => cmd_simulate(
            &artifact,
            state,
            &policy,
            SimulationSettings {
                paths,
                seed,
                epsilon_tail,
                parallel: !serial,
            },
            out.as_deref(),
        ),
        Command::Export { artifact, which, out } => cmd_export(&artifact, &which, &out),
    };
    result.map_or_else(|e| e, CommandOutcome::ok)
}

fn read(path: &Path) -> Result<String, CommandOutcome> {
    std::fs::read_to_string(path)
        .map_err(|e| CommandOutcome::fail(EXIT_IO, format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CommandOutcome> {
    let io_fail = |e: std::io::Error| CommandOutcome::fail(EXIT_IO, format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_fail)?;
    tmp.write_all(contents.as_bytes()).map_err(io_fail)?;
    tmp.as_file().sync_all().map_err(io_fail)?;
    tmp.persist(path).map_err(|e| io_fail(e.error))?;
    Ok(())
}

fn load(path: &Path) -> Result<RunArtifact, CommandOutcome> {
    let text = read(path)?;
    load_artifact(&text).map_err(|e| CommandOutcome::fail(EXIT_INVALID, e.to_string()))
}

fn invalid(e: impl std::fmt::Display) -> CommandOutcome {
    CommandOutcome::fail(EXIT_INVALID, e.to_string())
}

fn apply_overrides(
    mut config: RunConfig,
    h: Option<f64>,
    epsilon: Option<f64>,
    max_iter: Option<usize>,
) -> Result<RunConfig, CommandOutcome> {
    if let Some(h) = h {
        intervals_for(config.model.ceiling, h).map_err(|_| {
            invalid(format!(
                "--h {h} must be positive and divide the ceiling {} into a whole number of intervals",
                config.model.ceiling
            ))
        })?;
        config.h = h;
    }
    if let Some(eps) = epsilon {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(invalid(format!("--epsilon must be > 0, got {eps}")));
        }
        config.epsilon = eps;
    }
    if let Some(n) = max_iter {
        if n == 0 {
            return Err(invalid("--max-iter must be at least 1"));
        }
        config.max_iter = n;
    }
    Ok(config)
}

pub fn cmd_solve(
    config_path: &Path,
    out: &Path,
    h: Option<f64>,
    epsilon: Option<f64>,
    max_iter: Option<usize>,
    record_wall_time: bool,
) -> CmdResult {
    let text = read(config_path)?;
    let config = parse_model_config(&text).map_err(invalid)?;
    let config = apply_overrides(config, h, epsilon, max_iter)?;

    let started = Instant::now();
    let grid = Grid::build(&config.model, config.h).map_err(invalid)?;
    let vf = match solve(&config.model, &grid, config.epsilon, config.max_iter) {
        Ok(vf) => vf,
        Err(SolveError::NonConvergence { iterations, last_gap }) => {
            return Err(CommandOutcome::fail(
                EXIT_NON_CONVERGENCE,
                format!("no convergence after {iterations} sweeps\nfinal_gap={last_gap}"),
            ))
        }
        Err(e) => return Err(invalid(e)),
    };
    let policy = extract_policy(&vf, &config.model, config.region_tol()).map_err(invalid)?;
    let residuals = qvi_residuals(&vf, &config.model).map_err(invalid)?;
    let wall = started.elapsed().as_secs_f64();

    let artifact = RunArtifact::assemble(&config, &vf, &policy, &residuals, record_wall_time.then_some(wall));
    write_atomic(out, &save_artifact(&artifact))?;

    let mut s = String::new();
    let _ = writeln!(s, "iterations={}", vf.iterations);
    let _ = writeln!(s, "final_gap={}", vf.final_gap);
    let _ = writeln!(s, "intervals={}", grid.intervals());
    let _ = writeln!(s, "boundary={}", policy.boundary());
    let _ = writeln!(s, "max_abs_qvi_residual={}", residuals.max_abs_qvi());
    let _ = writeln!(s, "min_residual_branch={}", residuals.min_branch());
    if record_wall_time {
        let _ = writeln!(s, "wall_time_seconds={wall}");
    }
    let _ = writeln!(s, "artifact={}", out.display());
    Ok(s)
}

pub fn cmd_query(artifact_path: &Path, state: f64) -> CmdResult {
    let artifact = load(artifact_path)?;
    let ceiling = artifact.model().ceiling;
    if !(state.is_finite() && (0.0..=ceiling).contains(&state)) {
        return Err(invalid(format!("--state {state} lies outside [0, {ceiling}]")));
    }
    let policy = artifact.policy().map_err(invalid)?;
    let vf = artifact.value_function().map_err(invalid)?;
    let node = policy.node_for(state);
    let action = policy.action_at(state);
    let (zeta, target) = match action {
        Action::Intervene { zeta, .. } => (zeta, (state + zeta).min(ceiling)),
        _ => (0.0, state),
    };
    let value = vf.interpolate(state);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "region={} zeta={} target={} value={}",
        action.region().label(),
        zeta,
        target,
        value
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "state {state} looked up at grid node r = {}",
        policy.h() * node as f64
    );
    match action {
        Action::Intervene { .. } => {
            let _ = writeln!(s, "repair now by {zeta}, bringing the system to {target}");
        }
        Action::NoIntervention => {
            let _ = writeln!(
                s,
                "no repair needed; repairs start at or below r = {}",
                policy.boundary()
            );
        }
        Action::Cemetery => {
            let _ = writeln!(s, "state is at the failure threshold");
        }
    }
    let _ = writeln!(s, "optimal expected discounted profit {value}");
    Ok(s)
}

enum PolicyChoice {
    Solved,
    None,
    Shifted(f64),
}

fn parse_policy_choice(text: &str) -> Result<PolicyChoice, CommandOutcome> {
    match text {
        "solved" => Ok(PolicyChoice::Solved),
        "none" => Ok(PolicyChoice::None),
        other => match other.strip_prefix("shifted:").map(str::parse::<f64>) {
            Some(Ok(d)) if d.is_finite() => Ok(PolicyChoice::Shifted(d)),
            _ => Err(invalid(format!(
                "unknown policy `{other}`, expected solved, none, or shifted:<d>"
            ))),
        },
    }
}

pub fn cmd_simulate(
    artifact_path: &Path,
    state: f64,
    policy: &str,
    settings: SimulationSettings,
    out: Option<&Path>,
) -> CmdResult {
    let choice = parse_policy_choice(policy)?;
    let artifact = load(artifact_path)?;
    let model = artifact.model();
    let mut s = String::new();
    let _ = writeln!(s, "policy={policy}");
    let report = match choice {
        PolicyChoice::Solved => {
            let p = artifact.policy().map_err(invalid)?;
            estimate_profit(model, &p, state, &settings).map_err(invalid)?
        }
        PolicyChoice::Shifted(d) => {
            let vf = artifact.value_function().map_err(invalid)?;
            let p: Policy = threshold_policy(&vf, model, artifact.solve.boundary + d).map_err(invalid)?;
            let _ = writeln!(s, "shifted_boundary={}", p.boundary());
            estimate_profit(model, &p, state, &settings).map_err(invalid)?
        }
        PolicyChoice::None => estimate_profit(model, &DoNothing, state, &settings).map_err(invalid)?,
    };
    let _ = writeln!(s, "{report}");
    if let PolicyChoice::None = choice {
        let lifetimes = uncontrolled_failure_time_stats(model, state, settings.paths, settings.seed, settings.parallel)
            .map_err(invalid)?;
        let _ = writeln!(s, "{lifetimes}");
    }
    let vf_value = artifact.value_function().map_err(invalid)?.interpolate(state);
    let _ = writeln!(s, "solver_value={vf_value}");
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&report).expect("report is serializable") + "\n";
        write_atomic(path, &json)?;
    }
    Ok(s)
}

pub fn cmd_export(artifact_path: &Path, which: &str, out: &Path) -> CmdResult {
    let which: PlotData = which.parse().map_err(invalid)?;
    let artifact = load(artifact_path)?;
    let csv = export_plot_data(&artifact, which);
    write_atomic(out, &csv)?;
    Ok(format!("rows={}\nout={}\n", csv.lines().count() - 1, out.display()))
}
