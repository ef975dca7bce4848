//! The `carta` command line.
//!
//! Exit codes: 0 on success, 1 when planning fails or a trajectory is
//! invalid, 2 on usage and file errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use carta_core::generator::{generate_candidates, LatentSampler};
use carta_core::optimizer::{trajectory_length, validate, OptimizerParams, ValidityReport};
use carta_core::paths::generate_path;
use carta_core::planner::{plan, plan_from_candidates, run_suite, PlanResult};
use carta_core::{Clock, PlannerParams, Problem, TickClock};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::builtin::builtin_problem;
use crate::candidates_file::file_adapter;
use crate::obstacle_file::load_obstacles;
use crate::path_file::{load_path, path_to_csv};
use crate::report::{metrics_table_csv, save_convergence_log};
use crate::suite::{load_suite, resolve_chain, PathKind, PathSpecEntry, PlaneName, ProfileName, SuiteConfig};
use crate::trajectory_file::{load_trajectory, save_trajectory};
use crate::wall_clock::WallClock;
use crate::FileError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "carta", version, about = "Anytime Cartesian path planning for redundant manipulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan one problem and write the trajectory.
    Plan(PlanArgs),
    /// Run a suite of problems and write a metrics table.
    Bench(BenchArgs),
    /// Check a trajectory file against a problem.
    Validate(ValidateArgs),
    /// Write a parametric target path as CSV.
    MakePath(MakePathArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClockKind {
    /// Virtual clock advancing a fixed tick per read; reproducible timings.
    Tick,
    Wall,
}

#[derive(Debug, Args)]
struct ClockArgs {
    #[arg(long, value_enum, default_value = "wall")]
    clock: ClockKind,
    /// Seconds per read of the tick clock.
    #[arg(long, default_value_t = 1e-4)]
    tick: f64,
}

impl ClockArgs {
    fn make(&self) -> Box<dyn Clock> {
        match self.clock {
            ClockKind::Tick => Box::new(TickClock::new(self.tick)),
            ClockKind::Wall => Box::new(WallClock::new()),
        }
    }
}

/// A builtin problem, or a chain with a path file and optional obstacles.
#[derive(Debug, Args)]
struct ProblemArgs {
    /// Builtin problem name.
    #[arg(long, conflicts_with_all = ["chain", "path", "obstacles"])]
    problem: Option<String>,
    /// Builtin chain name or chain file.
    #[arg(long, requires = "path")]
    chain: Option<String>,
    /// Path CSV file.
    #[arg(long, requires = "chain")]
    path: Option<PathBuf>,
    /// Obstacle TOML file.
    #[arg(long, requires = "chain")]
    obstacles: Option<PathBuf>,
}

impl ProblemArgs {
    fn load(&self) -> Result<Problem, String> {
        if let Some(name) = &self.problem {
            return builtin_problem(name).ok_or_else(|| format!("unknown builtin problem `{name}`"));
        }
        let (Some(chain), Some(path)) = (&self.chain, &self.path) else {
            return Err("give --problem, or --chain and --path".into());
        };
        let chain = resolve_chain(chain, Path::new("")).map_err(|e| e.to_string())?;
        let path_poses = load_path(path).map_err(|e| e.to_string())?;
        let obstacles = match &self.obstacles {
            Some(f) => load_obstacles(f).map_err(|e| e.to_string())?,
            None => Vec::new(),
        };
        Ok(Problem {
            name: path.file_stem().map_or_else(|| "problem".into(), |s| s.to_string_lossy().into_owned()),
            chain,
            path: path_poses,
            obstacles,
        })
    }
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 120.0)]
    budget_s: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of candidate plans.
    #[arg(long)]
    k: Option<usize>,
    /// Replay stored candidate plans instead of generating them.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Trajectory CSV to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Convergence log CSV to write.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    clock: ClockArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Suite TOML file; the builtin problems when absent.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Runs per problem; overrides the suite file.
    #[arg(long)]
    repeats: Option<usize>,
    /// Only run problems whose name contains this text.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long)]
    out_table: Option<PathBuf>,
    #[command(flatten)]
    clock: ClockArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    traj: PathBuf,
}

#[derive(Debug, Args)]
struct MakePathArgs {
    #[arg(long, value_enum)]
    kind: PathKind,
    #[arg(long, default_value_t = crate::builtin::DEFAULT_WAYPOINTS)]
    n: usize,
    /// x,y,z in meters.
    #[arg(long, value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
    center: [f64; 3],
    /// roll,pitch,yaw in radians.
    #[arg(long, value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
    rpy: [f64; 3],
    #[arg(long, value_enum, default_value = "yz")]
    plane: PlaneName,
    #[arg(long, value_enum, default_value = "fixed")]
    profile: ProfileName,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    side: Option<f64>,
    #[arg(long)]
    corner_radius: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    loops: Option<usize>,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    axis: Option<[f64; 3]>,
    /// Radians.
    #[arg(long, allow_hyphen_values = true)]
    angle: Option<f64>,
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    offset: Option<[f64; 3]>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `x,y,z` as three finite numbers.
fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok([x, y, z]),
        _ => Err(format!("expected three finite comma-separated numbers, got `{s}`")),
    }
}

/// Human-readable list of the checks a trajectory fails.
pub fn failed_checks(report: &ValidityReport, params: &OptimizerParams) -> Vec<String> {
    let mut out = Vec::new();
    if report.max_pos_err > params.pos_threshold {
        out.push(format!(
            "position error {:.3e} m exceeds {:.1e} m",
            report.max_pos_err, params.pos_threshold
        ));
    }
    if report.max_rot_err > params.rot_threshold {
        out.push(format!(
            "rotation error {:.4} deg exceeds {:.4} deg",
            report.max_rot_err.to_degrees(),
            params.rot_threshold.to_degrees()
        ));
    }
    if report.max_step_revolute > params.step_limit_revolute {
        out.push(format!(
            "revolute step {:.3} deg exceeds {:.3} deg",
            report.max_step_revolute.to_degrees(),
            params.step_limit_revolute.to_degrees()
        ));
    }
    if report.max_step_prismatic > params.step_limit_prismatic {
        out.push(format!(
            "prismatic step {:.4} m exceeds {:.4} m",
            report.max_step_prismatic, params.step_limit_prismatic
        ));
    }
    if report.min_self_distance <= 0.0 {
        out.push(format!("self collision, clearance {:.4} m", report.min_self_distance));
    }
    if report.min_env_distance <= 0.0 {
        out.push(format!("environment collision, clearance {:.4} m", report.min_env_distance));
    }
    if report.limit_violations > 0 {
        out.push(format!("{} joint values outside their limits", report.limit_violations));
    }
    out
}

fn summary(result: &PlanResult) -> String {
    let fmt = |t: Option<f64>| t.map_or_else(|| "inf".to_string(), |t| format!("{t:.3}"));
    let best = result.emissions.last().and_then(|_| result.best_length_at(f64::INFINITY));
    format!(
        "success={} time_to_valid_s={} initial_solution_s={} emissions={} length={} candidates={} densify_rounds={}",
        result.success,
        fmt(result.time_to_valid),
        fmt(result.initial_solution_time),
        result.emissions.len(),
        best.map_or_else(|| "none".to_string(), |(r, m)| format!("{r:.4}rad/{m:.4}m")),
        result.stats.candidates,
        result.stats.densify_rounds,
    )
}

fn cmd_plan(args: PlanArgs, out: &mut dyn Write) -> Result<i32, String> {
    let problem = args.problem.load()?;
    let mut params = PlannerParams {
        seed: args.seed,
        budget_s: args.budget_s,
        ..PlannerParams::default()
    };
    if let Some(k) = args.k {
        params.k = k;
        params.densification_increment = k / 2;
    }
    let clock = args.clock.make();
    let result = match &args.candidates {
        None => plan(&problem, &params, clock.as_ref()),
        Some(file) => {
            let stored = file_adapter(file, &problem.chain, &problem.path).map_err(|e| e.to_string())?;
            let mut sampler = LatentSampler::new(stored.shape().2, params.seed);
            let latents = sampler.take(stored.shape().0).map_err(|e| e.to_string())?;
            let set = generate_candidates(&stored, &problem.path, latents).map_err(|e| e.to_string())?;
            // Stored plans cannot be extended.
            params.max_densify_rounds = 0;
            params.k = set.k();
            plan_from_candidates(&problem, &params, &stored, set, &mut sampler, clock.as_ref())
        }
    }
    .map_err(|e| e.to_string())?;
    writeln!(out, "{}: {}", problem.name, summary(&result)).map_err(|e| e.to_string())?;
    if let (Some(path), Some(traj)) = (&args.out, &result.trajectory) {
        save_trajectory(path, &problem.chain, traj).map_err(|e| e.to_string())?;
    }
    if let Some(path) = &args.log {
        save_convergence_log(path, &result.emissions).map_err(|e| e.to_string())?;
    }
    Ok(if result.success { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_bench(args: BenchArgs, out: &mut dyn Write) -> Result<i32, String> {
    let mut suite = match &args.suite {
        Some(path) => load_suite(path).map_err(|e| e.to_string())?,
        None => SuiteConfig::builtin(10),
    };
    if let Some(r) = args.repeats {
        if r == 0 {
            return Err("--repeats must be at least 1".into());
        }
        suite.repeats = r;
    }
    if let Some(f) = &args.filter {
        suite.problems.retain(|(p, _)| p.name.contains(f.as_str()));
    }
    let mut rows = Vec::new();
    for (problem, params) in &suite.problems {
        let clock = || args.clock.make();
        let m = run_suite(std::slice::from_ref(problem), params, suite.repeats, suite.cutoff_s, clock)
            .map_err(|e| e.to_string())?;
        rows.extend(m);
    }
    let table = metrics_table_csv(&rows);
    out.write_all(table.as_bytes()).map_err(|e| e.to_string())?;
    if let Some(path) = &args.out_table {
        crate::write_text(path, &table).map_err(|e| e.to_string())?;
    }
    let all_solved = rows.iter().all(|m| m.success_rate_budget == 1.0);
    Ok(if all_solved { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_validate(args: ValidateArgs, out: &mut dyn Write) -> Result<i32, String> {
    let problem = args.problem.load()?;
    let traj = load_trajectory(&args.traj, &problem.chain).map_err(|e| e.to_string())?;
    let params = OptimizerParams::default();
    let report = validate(&traj, problem.path.poses(), &problem.chain, &problem.obstacles, &params)
        .map_err(|e| e.to_string())?;
    let (rad, m) = trajectory_length(&problem.chain, &traj);
    let failures = failed_checks(&report, &params);
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| e.to_string());
    if failures.is_empty() {
        w(out, format!("valid: length {rad:.4} rad / {m:.4} m"))?;
        Ok(EXIT_OK)
    } else {
        for f in failures {
            w(out, format!("invalid: {f}"))?;
        }
        Ok(EXIT_FAILED)
    }
}

fn cmd_make_path(args: MakePathArgs, out: &mut dyn Write) -> Result<i32, String> {
    let mut entry = PathSpecEntry::new(args.kind);
    entry.center = args.center;
    entry.rpy = args.rpy;
    entry.n = args.n;
    entry.plane = args.plane;
    entry.profile = args.profile;
    entry.radius = args.radius;
    entry.side = args.side;
    entry.corner_radius = args.corner_radius;
    entry.height = args.height;
    entry.loops = args.loops;
    entry.axis = args.axis;
    entry.angle = args.angle;
    entry.offset = args.offset;
    let spec = entry.to_spec().map_err(|e| e.to_string())?;
    let path = generate_path(&spec).map_err(|e| e.to_string())?;
    let text = path_to_csv(&path);
    match &args.out {
        Some(file) => crate::write_text(file, &text).map_err(|e: FileError| e.to_string())?,
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string())?,
    }
    Ok(EXIT_OK)
}

/// Runs the command line on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::MakePath(a) => cmd_make_path(a, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}
