//! Generate, search, densify, optimize.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use crate::clock::{Clock, FrozenClock, TickClock};
use crate::generator::{generate_candidates, CandidateSet, DlsParams, DlsTracker, GenerativeIk, GeneratorError, LatentSampler, TargetPath};
use crate::geometry::Cuboid;
use crate::kinematics::KinematicChain;
use crate::metrics::{summarize, ProblemMetrics};
use crate::optimizer::{OptimizeError, OptimizeOutcome, Optimizer, OptimizerParams, Trajectory, ValidityReport};
use crate::search::{dp_search, SearchError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("invalid planner parameters: {0}")]
    Params(&'static str),
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub chain: KinematicChain,
    pub path: TargetPath,
    pub obstacles: Vec<Cuboid>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerParams {
    /// Initial number of candidate plans.
    pub k: usize,
    pub seed: u64,
    /// Revolute mjac above which the search seed is densified, radians.
    pub retry_mjac_revolute: f64,
    /// Prismatic mjac above which the search seed is densified, meters.
    pub retry_mjac_prismatic: f64,
    /// Plans added per densification round.
    pub densification_increment: usize,
    pub max_densify_rounds: usize,
    /// Seconds, measured on the injected clock.
    pub budget_s: f64,
    pub optimizer: OptimizerParams,
    pub generator: DlsParams,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            k: 175,
            seed: 0,
            retry_mjac_revolute: 12f64.to_radians(),
            retry_mjac_prismatic: 0.03,
            densification_increment: 175 / 2,
            max_densify_rounds: 4,
            budget_s: 120.0,
            optimizer: OptimizerParams::default(),
            generator: DlsParams::default(),
        }
    }
}

impl PlannerParams {
    fn check(&self) -> Result<(), PlanError> {
        if self.k == 0 {
            return Err(PlanError::Params("k must be at least 1"));
        }
        if !(self.retry_mjac_revolute > 0.0 && self.retry_mjac_prismatic > 0.0) {
            return Err(PlanError::Params("retry thresholds must be positive"));
        }
        if !(self.budget_s > 0.0) {
            return Err(PlanError::Params("budget must be positive"));
        }
        if !(self.optimizer.lambda_init > 0.0 && self.optimizer.pos_threshold > 0.0 && self.optimizer.rot_threshold > 0.0) {
            return Err(PlanError::Params("damping and thresholds must be positive"));
        }
        Ok(())
    }
}

/// One optimizer emission, timestamped relative to the start of `plan`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionRecord {
    pub time: f64,
    pub length_rad: f64,
    pub length_m: f64,
    pub valid: bool,
    pub report: ValidityReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlanStats {
    pub densify_rounds: usize,
    pub candidates: usize,
    pub penalty_evaluations: usize,
    /// Distinct (plan, waypoint) nodes whose checks are cached.
    pub cached_nodes: usize,
    pub optimizer_restarts: usize,
    pub cycles: usize,
    /// Why the last optimizer run stopped.
    pub outcome: Option<OptimizeOutcome>,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub emissions: Vec<EmissionRecord>,
    pub time_to_valid: Option<f64>,
    pub initial_solution_time: Option<f64>,
    /// Shortest valid trajectory, or the last emitted one when none was valid.
    pub trajectory: Option<Trajectory>,
    pub success: bool,
    pub stats: PlanStats,
}

impl PlanResult {
    /// Best-so-far valid length (rad, m) after each emission; `None` until the
    /// first valid one.
    pub fn best_length_history(&self) -> Vec<Option<(f64, f64)>> {
        let mut best: Option<(f64, f64)> = None;
        self.emissions
            .iter()
            .map(|e| {
                if e.valid {
                    let score = crate::optimizer::length_score((e.length_rad, e.length_m));
                    if best.map_or(true, |b| score <= crate::optimizer::length_score(b)) {
                        best = Some((e.length_rad, e.length_m));
                    }
                }
                best
            })
            .collect()
    }

    /// Shortest valid length emitted at or before `cutoff` seconds.
    pub fn best_length_at(&self, cutoff: f64) -> Option<(f64, f64)> {
        let history = self.best_length_history();
        self.emissions
            .iter()
            .zip(history)
            .take_while(|(e, _)| e.time <= cutoff)
            .last()
            .and_then(|(_, b)| b)
    }
}

/// Runs the pipeline with the default damped-least-squares generator.
pub fn plan(problem: &Problem, params: &PlannerParams, clock: &dyn Clock) -> Result<PlanResult, PlanError> {
    let gen = DlsTracker::new(&problem.chain, params.generator);
    plan_with_generator(problem, params, &gen, clock)
}

pub fn plan_with_generator(
    problem: &Problem,
    params: &PlannerParams,
    gen: &dyn GenerativeIk,
    clock: &dyn Clock,
) -> Result<PlanResult, PlanError> {
    params.check()?;
    let start = clock.now();
    let mut sampler = LatentSampler::new(gen.dof(), params.seed);
    let candidates = generate_candidates(gen, &problem.path, sampler.take(params.k)?)?;
    run_pipeline(problem, params, gen, candidates, &mut sampler, clock, start)
}

/// Runs search and optimization on a prebuilt candidate set. Densification
/// rounds call `gen` with latents drawn from `sampler`.
pub fn plan_from_candidates(
    problem: &Problem,
    params: &PlannerParams,
    gen: &dyn GenerativeIk,
    candidates: CandidateSet,
    sampler: &mut LatentSampler,
    clock: &dyn Clock,
) -> Result<PlanResult, PlanError> {
    params.check()?;
    let start = clock.now();
    run_pipeline(problem, params, gen, candidates, sampler, clock, start)
}

fn run_pipeline(
    problem: &Problem,
    params: &PlannerParams,
    gen: &dyn GenerativeIk,
    mut candidates: CandidateSet,
    sampler: &mut LatentSampler,
    clock: &dyn Clock,
    start: f64,
) -> Result<PlanResult, PlanError> {
    let chain = &problem.chain;
    let obstacles = &problem.obstacles[..];
    let targets = problem.path.poses();
    let deadline = start + params.budget_s;
    let mut stats = PlanStats::default();
    let mut emissions = Vec::new();
    let mut best: Option<Trajectory> = None;
    let mut last: Option<Trajectory>;

    let mut densify = |candidates: &mut CandidateSet, stats: &mut PlanStats| -> Result<bool, PlanError> {
        if stats.densify_rounds >= params.max_densify_rounds || params.densification_increment == 0 {
            return Ok(false);
        }
        candidates.extend(gen, &problem.path, sampler.take(params.densification_increment)?)?;
        stats.densify_rounds += 1;
        Ok(true)
    };

    loop {
        let mut seed = dp_search(&mut candidates, chain, obstacles)?;
        loop {
            let (rev, pris) = crate::search::mjac(seed.trajectory.configs(), chain)?;
            let smooth = rev <= params.retry_mjac_revolute && pris <= params.retry_mjac_prismatic;
            if smooth || clock.now() >= deadline || !densify(&mut candidates, &mut stats)? {
                break;
            }
            seed = dp_search(&mut candidates, chain, obstacles)?;
        }

        let mut opt = Optimizer::new(chain, targets, obstacles, seed.trajectory, params.optimizer)?;
        let outcome = opt.run(clock, deadline, &mut |e| {
            emissions.push(EmissionRecord {
                time: e.time - start,
                length_rad: e.length_rad,
                length_m: e.length_m,
                valid: e.valid(),
                report: e.report,
            });
        })?;
        stats.cycles += opt.cycles();
        stats.outcome = Some(outcome);
        if let Some(b) = opt.best() {
            best = Some(b.trajectory.clone());
        }
        last = Some(opt.current().clone());
        if best.is_some() || !outcome.is_failure() {
            break;
        }
        if clock.now() >= deadline || !densify(&mut candidates, &mut stats)? {
            break;
        }
        stats.optimizer_restarts += 1;
    }

    stats.candidates = candidates.k();
    stats.penalty_evaluations = candidates.penalty_evaluations();
    stats.cached_nodes = candidates.cached_nodes();
    let success = best.is_some();
    Ok(PlanResult {
        time_to_valid: emissions.iter().find(|e| e.valid).map(|e| e.time),
        initial_solution_time: emissions.first().map(|e| e.time),
        emissions,
        trajectory: best.or(last),
        success,
        stats,
    })
}

/// Runs every problem `repeats` times with seeds `params.seed + r` and
/// summarizes the runs per problem. `clock` builds a fresh clock per run.
pub fn run_suite<C: Clock>(
    problems: &[Problem],
    params: &PlannerParams,
    repeats: usize,
    cutoff_s: f64,
    clock: impl Fn() -> C,
) -> Result<Vec<ProblemMetrics>, PlanError> {
    if repeats == 0 {
        return Err(PlanError::Params("repeats must be at least 1"));
    }
    problems
        .iter()
        .map(|problem| {
            let runs = (0..repeats)
                .map(|r| {
                    let p = PlannerParams {
                        seed: params.seed.wrapping_add(r as u64),
                        ..*params
                    };
                    plan(problem, &p, &clock())
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(summarize(&problem.name, &runs, cutoff_s, params.budget_s))
        })
        .collect()
}
