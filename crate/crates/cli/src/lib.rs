//! Command-line driver: condition check, periodic solve, trajectory
//! simulation and a self-contained demo run.

pub mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};

use cellflux::cell_model::{
    necessary_condition, solve_cell_model, solve_cell_model_enclosing, CellSolution, Condition,
};
use cellflux::trajectory::{attraction_metrics, integrate, AttractionReport, Trajectory};
use cellflux::Error;
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::RunConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A simulated trajectory failed its attraction check.
    pub const ATTRACTION_FAILED: i32 = 1;
    pub const CONDITION_VIOLATED: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const SINGULARITY: i32 = 4;
    pub const CONFIG: i32 = 64;
    /// Output could not be written.
    pub const IO: i32 = 74;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Exit(String, i32),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io(_) => exit::IO,
            CliError::Exit(_, code) => *code,
            CliError::Core(e) => match e {
                Error::ConditionViolated { .. } => exit::CONDITION_VIOLATED,
                Error::NonConvergence { .. } | Error::MonotonicityBreach { .. } => {
                    exit::NON_CONVERGENCE
                }
                Error::SingularityApproached { .. } | Error::NearSingular { .. } => {
                    exit::SINGULARITY
                }
                Error::Config(_) | Error::PeriodicityViolation { .. } | Error::Domain(_) => {
                    exit::CONFIG
                }
                Error::Construction(_) | Error::InvalidEnvelope(_) => exit::NON_CONVERGENCE,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cellflux", version, about = "Periodic solutions of the cell-volume model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Overrides {
    /// Grid intervals per period (even)
    #[arg(long)]
    pub grid: Option<usize>,
    /// Step tolerance of the monotone iteration
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for random initial points
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the necessary condition
    Check {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compute the periodic solution and write it to the output directory
    Solve {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Integrate trajectories and measure their attraction to the periodic solution
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run check, solve and simulate on built-in parameters
    Demo {
        #[command(flatten)]
        overrides: Overrides,
    },
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(n) = self.grid {
            cfg.solver.grid = n;
        }
        if let Some(t) = self.tol {
            cfg.solver.tol_step = t;
        }
        if let Some(s) = self.seed {
            cfg.trajectory.seed = s;
        }
        if let Some(dir) = &self.out {
            cfg.output.directory = dir.clone();
        }
        // re-validate after overriding
        *cfg = RunConfig::parse(&cfg.to_toml())?;
        Ok(())
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let text = e.render().to_string();
            let _ = if code == exit::OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Check { config, overrides } => check(&load(&config, &overrides)?, out),
        Command::Solve { config, overrides } => {
            solve(&load(&config, &overrides)?, out).map(|_| exit::OK)
        }
        Command::Simulate { config, overrides } => simulate(&load(&config, &overrides)?, out),
        Command::Demo { overrides } => {
            let mut cfg = RunConfig::demo();
            overrides.apply(&mut cfg)?;
            demo(&cfg, out)
        }
    }
}

fn condition(cfg: &RunConfig) -> Result<Condition, CliError> {
    Ok(necessary_condition(&cfg.model_params()?, cfg.solver.grid)?)
}

fn print_condition(c: &Condition, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "alpha_mean = {:.16e}", c.alpha_mean)?;
    writeln!(out, "gamma_mean = {:.16e}", c.gamma_mean)?;
    writeln!(out, "condition_value = {:.16e}", c.value)?;
    writeln!(
        out,
        "condition = {}",
        if c.holds() { "holds" } else { "violated" }
    )
}

/// Prints the condition; exit code 2 when it fails.
pub fn check(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let c = condition(cfg)?;
    print_condition(&c, out)?;
    Ok(if c.holds() {
        exit::OK
    } else {
        exit::CONDITION_VIOLATED
    })
}

/// Solves for the periodic solution and writes the solve artifacts.
///
/// On non-convergence the iteration history and a summary are still written.
pub fn solve(cfg: &RunConfig, out: &mut dyn Write) -> Result<CellSolution, CliError> {
    solve_enclosing(cfg, None, out)
}

fn solve_enclosing(
    cfg: &RunConfig,
    points: Option<&[(f64, f64)]>,
    out: &mut dyn Write,
) -> Result<CellSolution, CliError> {
    let params = cfg.model_params()?;
    let solver = cfg.solver_config();
    let result = match points {
        Some(points) => solve_cell_model_enclosing(&params, &solver, points),
        None => solve_cell_model(&params, &solver),
    };
    let writer = output::OutputDir::create(cfg)?;
    match result {
        Ok(solution) => {
            writer.write_solution(cfg, &solution)?;
            print_condition(&solution.condition, out)?;
            writeln!(out, "iterations = {}", solution.report.iterations)?;
            writeln!(out, "final_gap = {:.16e}", solution.report.final_gap())?;
            writeln!(out, "unique = {}", solution.unique)?;
            writeln!(out, "output = {}", writer.dir().display())?;
            Ok(solution)
        }
        Err(Error::NonConvergence { report }) => {
            writer.write_partial(cfg, &report)?;
            Err(Error::NonConvergence { report }.into())
        }
        Err(e) => Err(e.into()),
    }
}

/// Initial points: the configured ones followed by the seeded random draws.
pub fn initial_points(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let t = &cfg.trajectory;
    let mut points: Vec<(f64, f64)> = t.initial_points.iter().map(|p| (p[0], p[1])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let [lo, hi] = t.random_range;
    for _ in 0..t.random_points {
        let x = rng.gen_range(lo..hi);
        let y = rng.gen_range(lo..hi);
        points.push((x, y));
    }
    points
}

/// Per-point simulation outcome.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: (f64, f64),
    pub trajectory: Trajectory,
    pub attraction: AttractionReport,
}

/// Integrates every initial point against an already computed solution.
pub fn simulate_points(
    cfg: &RunConfig,
    solution: &CellSolution,
    points: &[(f64, f64)],
) -> Result<Vec<PointResult>, CliError> {
    let params = cfg.model_params()?;
    let (px, py) = solution.periodic_solution();
    let step = cfg.step();
    let horizon = cfg.trajectory.horizon;
    let tol = cfg.trajectory.attraction_tol;
    points
        .par_iter()
        .enumerate()
        .map(|(i, &(x0, y0))| {
            let trajectory = integrate(&params, x0, y0, step, horizon).map_err(|e| match e {
                Error::SingularityApproached { t, x, y } => CliError::Exit(
                    format!(
                        "trajectory {i} from ({x0:e}, {y0:e}) approached y = 0 \
                         (last safe state t = {t:e}, x = {x:e}, y = {y:e})"
                    ),
                    exit::SINGULARITY,
                ),
                other => other.into(),
            })?;
            let attraction = attraction_metrics(&trajectory, &px, &py, tol)?;
            Ok(PointResult {
                point: (x0, y0),
                trajectory,
                attraction,
            })
        })
        .collect()
}

fn report_simulation(
    cfg: &RunConfig,
    results: &[PointResult],
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let writer = output::OutputDir::create(cfg)?;
    writer.write_simulation(cfg, results)?;
    let mut all = true;
    for (i, r) in results.iter().enumerate() {
        all &= r.attraction.passed;
        writeln!(
            out,
            "trajectory_{i} = ({:.6e}, {:.6e}) d_final {:.3e} {}",
            r.point.0,
            r.point.1,
            r.attraction.final_distance(),
            if r.attraction.passed { "attracted" } else { "not_attracted" }
        )?;
    }
    writeln!(out, "output = {}", writer.dir().display())?;
    Ok(if all { exit::OK } else { exit::ATTRACTION_FAILED })
}

/// Solves with an envelope enclosing every initial point, then integrates.
pub fn simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let points = initial_points(cfg);
    if points.is_empty() {
        return Err(CliError::Config(
            "trajectory: no initial_points and random_points = 0".into(),
        ));
    }
    let solution = solve_enclosing(cfg, Some(&positive(&points)), &mut std::io::sink())?;
    let results = simulate_points(cfg, &solution, &points)?;
    report_simulation(cfg, &results, out)
}

// Points outside the positive quadrant cannot be enclosed; they are still
// integrated and typically end in a singularity.
fn positive(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .collect()
}

/// Check, solve and simulate in one pass.
pub fn demo(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let code = check(cfg, out)?;
    if code != exit::OK {
        return Ok(code);
    }
    let points = initial_points(cfg);
    let solution = solve_enclosing(cfg, Some(&positive(&points)), &mut std::io::sink())?;
    writeln!(out, "iterations = {}", solution.report.iterations)?;
    writeln!(out, "final_gap = {:.16e}", solution.report.final_gap())?;
    writeln!(out, "unique = {}", solution.unique)?;
    let results = simulate_points(cfg, &solution, &points)?;
    report_simulation(cfg, &results, out)
}
