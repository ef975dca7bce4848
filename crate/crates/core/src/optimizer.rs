//! Levenberg-Marquardt trajectory refinement with a non-stationary objective.
//!
//! Two residuals alternate. `r_pose` stacks the (x, y, z, roll, pitch, yaw)
//! error of every waypoint and is minimized alone until every waypoint is
//! inside the pose tolerance. Then a single step is taken on `r_diff`, which
//! stacks the weighted differences `q_{i+1} - q_i` and hinge penalties on
//! every self and environment collision distance. The cycle repeats, and the
//! shortest valid trajectory seen so far is kept.
//!
//! Both Jacobians are sparse: `r_pose` is block diagonal with one 6 x d block
//! per waypoint, and `r_diff` couples only neighbouring waypoints. The normal
//! equations are therefore solved as `n` independent d x d systems for the
//! pose phase and as a block-tridiagonal system for the diff step.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6xX, Vector6};
use num_traits::Float;
use thiserror::Error;

use crate::clock::Clock;
use crate::geometry::{collision_entries, collision_entry_count, entry_gradient, min_distances, Cuboid};
use crate::kinematics::{pose_error, ChainError, ChainState, Config, JointKind, KinematicChain, Pose};
use crate::linalg::{solve_block_tridiagonal, solve_spd, wrap_angle};
use crate::search::{STEP_LIMIT_PRISMATIC, STEP_LIMIT_REVOLUTE};

/// Smallest |cos(pitch)| used by the Euler-rate transform.
const GIMBAL_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("trajectory has {got} timesteps but the target path has {expected}")]
    PathLength { expected: usize, got: usize },
    #[error("trajectory needs at least two timesteps")]
    TooShort,
    #[error("residual/Jacobian shapes disagree: {0}")]
    Shape(&'static str),
    #[error("normal equations stayed singular up to the damping cap")]
    Singular,
}

/// Joint-space trajectory `[q_1, ..., q_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    configs: Vec<Config>,
}

impl Trajectory {
    pub fn new(configs: Vec<Config>) -> Self {
        Self { configs }
    }

    pub fn configs(&self) -> &[Config] {
        &self.configs
    }

    pub fn configs_mut(&mut self) -> &mut [Config] {
        &mut self.configs
    }

    pub fn into_configs(self) -> Vec<Config> {
        self.configs
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.configs.first().map_or(0, |q| q.len())
    }

    fn check(&self, chain: &KinematicChain) -> Result<(), OptimizeError> {
        for q in &self.configs {
            chain.check_config(q)?;
        }
        Ok(())
    }
}

/// Cumulative configuration-space path length: the per-step Euclidean norm
/// over revolute joints (radians) and over prismatic joints (meters).
pub fn trajectory_length(chain: &KinematicChain, traj: &Trajectory) -> (f64, f64) {
    let kinds = chain.kinds();
    let mut rad = 0.0;
    let mut m = 0.0;
    for pair in traj.configs().windows(2) {
        let mut r2 = 0.0;
        let mut p2 = 0.0;
        for (j, kind) in kinds.iter().enumerate() {
            let delta = pair[1][j] - pair[0][j];
            match kind {
                JointKind::Prismatic => p2 += delta * delta,
                _ => r2 += delta * delta,
            }
        }
        rad += r2.sqrt();
        m += p2.sqrt();
    }
    (rad, m)
}

/// Scalar used to rank trajectories by length: meters are converted to
/// radians at the ratio of the two discontinuity limits.
pub fn length_score(length: (f64, f64)) -> f64 {
    length.0 + length.1 * (STEP_LIMIT_REVOLUTE / STEP_LIMIT_PRISMATIC)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerParams {
    pub lambda_init: f64,
    pub lambda_decrease: f64,
    pub lambda_increase: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Initial damping of the length/collision step.
    pub diff_lambda_init: f64,
    /// Position tolerance, meters.
    pub pos_threshold: f64,
    /// Rotation tolerance, radians.
    pub rot_threshold: f64,
    pub step_limit_revolute: f64,
    pub step_limit_prismatic: f64,
    pub w_length: f64,
    pub w_selfcol: f64,
    pub w_envcol: f64,
    /// Collision hinges activate below this distance, meters.
    pub margin: f64,
    /// Pose iterations allowed when starting from the seed.
    pub initial_pose_iters: usize,
    /// Pose iterations allowed to recover after each diff step.
    pub recover_pose_iters: usize,
    pub max_cycles: usize,
    /// Stop after this many cycles without a shorter valid trajectory.
    pub stall_cycles: usize,
    /// Relative length decrease that counts as progress.
    pub stall_tolerance: f64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            lambda_init: 1e-4,
            lambda_decrease: 0.5,
            lambda_increase: 10.0,
            lambda_min: 1e-10,
            lambda_max: 1e6,
            diff_lambda_init: 1.0,
            pos_threshold: 1e-4,
            rot_threshold: 0.1f64.to_radians(),
            step_limit_revolute: STEP_LIMIT_REVOLUTE,
            step_limit_prismatic: STEP_LIMIT_PRISMATIC,
            w_length: 1.0,
            w_selfcol: 10.0,
            w_envcol: 10.0,
            margin: 0.01,
            initial_pose_iters: 60,
            recover_pose_iters: 12,
            max_cycles: 400,
            stall_cycles: 40,
            stall_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    pub max_pos_err: f64,
    pub max_rot_err: f64,
    pub min_self_distance: f64,
    pub min_env_distance: f64,
    pub max_step_revolute: f64,
    pub max_step_prismatic: f64,
    pub limit_violations: usize,
    pub pose_ok: bool,
    pub collision_ok: bool,
    pub steps_ok: bool,
    pub limits_ok: bool,
}

impl ValidityReport {
    pub fn valid(&self) -> bool {
        self.pose_ok && self.collision_ok && self.steps_ok && self.limits_ok
    }
}

fn check_shapes(chain: &KinematicChain, traj: &Trajectory, targets: &[Pose]) -> Result<(), OptimizeError> {
    if traj.len() != targets.len() {
        return Err(OptimizeError::PathLength {
            expected: targets.len(),
            got: traj.len(),
        });
    }
    traj.check(chain)
}

/// Checks every constraint of the problem independently of the optimizer.
pub fn validate(
    traj: &Trajectory,
    targets: &[Pose],
    chain: &KinematicChain,
    obstacles: &[Cuboid],
    params: &OptimizerParams,
) -> Result<ValidityReport, OptimizeError> {
    check_shapes(chain, traj, targets)?;
    let mut max_pos: f64 = 0.0;
    let mut max_rot: f64 = 0.0;
    let mut min_self = f64::infinity();
    let mut min_env = f64::infinity();
    let mut violations = 0;
    for (q, y) in traj.configs().iter().zip(targets) {
        let state = chain.state_unchecked(q);
        let (pos, rot) = pose_error(&state.end_effector(), y);
        max_pos = max_pos.max(pos);
        max_rot = max_rot.max(rot);
        let (s, e) = min_distances(chain, &state, obstacles);
        min_self = min_self.min(s);
        min_env = min_env.min(e);
        violations += q
            .iter()
            .enumerate()
            .filter(|(j, v)| **v < chain.lower()[*j] || **v > chain.upper()[*j])
            .count();
    }
    let (step_rev, step_pris) = if traj.len() >= 2 {
        crate::search::mjac(traj.configs(), chain).expect("length checked")
    } else {
        (0.0, 0.0)
    };
    Ok(ValidityReport {
        max_pos_err: max_pos,
        max_rot_err: max_rot,
        min_self_distance: min_self,
        min_env_distance: min_env,
        max_step_revolute: step_rev,
        max_step_prismatic: step_pris,
        limit_violations: violations,
        pose_ok: max_pos <= params.pos_threshold && max_rot <= params.rot_threshold,
        collision_ok: min_self > 0.0 && min_env > 0.0,
        steps_ok: step_rev <= params.step_limit_revolute && step_pris <= params.step_limit_prismatic,
        limits_ok: violations == 0,
    })
}

/// (x, y, z, roll, pitch, yaw) of `current` minus `target`, angles wrapped.
pub fn pose_residual_block(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = current.position - target.position;
    let a = current.rpy();
    let b = target.rpy();
    Vector6::new(
        dp.x,
        dp.y,
        dp.z,
        wrap_angle(a[0] - b[0]),
        wrap_angle(a[1] - b[1]),
        wrap_angle(a[2] - b[2]),
    )
}

/// Maps world angular velocity to roll/pitch/yaw rates for
/// `R = Rz(yaw) Ry(pitch) Rx(roll)`.
fn euler_rate_inverse(rpy: [f64; 3]) -> Matrix3<f64> {
    let (sp, cp) = rpy[1].sin_cos();
    let (sy, cy) = rpy[2].sin_cos();
    let cp = if cp.abs() < GIMBAL_EPS {
        GIMBAL_EPS.copysign(if cp == 0.0 { 1.0 } else { cp })
    } else {
        cp
    };
    let tp = sp / cp;
    Matrix3::new(
        cy / cp, sy / cp, 0.0, //
        -sy, cy, 0.0, //
        cy * tp, sy * tp, 1.0,
    )
}

/// Jacobian of [`pose_residual_block`] with respect to the joint values.
pub fn pose_block_jacobian(state: &ChainState) -> Matrix6xX<f64> {
    let mut jac = state.jacobian();
    let map = euler_rate_inverse(state.end_effector().rpy());
    for c in 0..jac.ncols() {
        let w = jac.fixed_view::<3, 1>(3, c).into_owned();
        jac.fixed_view_mut::<3, 1>(3, c).copy_from(&(map * w));
    }
    jac
}

pub fn residual_pose(chain: &KinematicChain, traj: &Trajectory, targets: &[Pose]) -> Result<DVector<f64>, OptimizeError> {
    check_shapes(chain, traj, targets)?;
    let mut r = DVector::zeros(6 * traj.len());
    for (i, (q, y)) in traj.configs().iter().zip(targets).enumerate() {
        let pose = chain.state_unchecked(q).end_effector();
        r.fixed_rows_mut::<6>(6 * i).copy_from(&pose_residual_block(&pose, y));
    }
    Ok(r)
}

/// Block-diagonal matrix with one 6 x d block per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    pub blocks: Vec<Matrix6xX<f64>>,
}

impl BlockDiagonal {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.blocks.first().map_or(0, |b| b.ncols());
        let n = self.blocks.len();
        let mut m = DMatrix::zeros(6 * n, d * n);
        for (i, b) in self.blocks.iter().enumerate() {
            m.view_mut((6 * i, d * i), (6, d)).copy_from(b);
        }
        m
    }
}

pub fn jacobian_pose(chain: &KinematicChain, traj: &Trajectory) -> Result<BlockDiagonal, OptimizeError> {
    traj.check(chain)?;
    Ok(BlockDiagonal {
        blocks: traj
            .configs()
            .iter()
            .map(|q| pose_block_jacobian(&chain.state_unchecked(q)))
            .collect(),
    })
}

/// Weights and margin of the diff residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffWeights {
    pub w_length: f64,
    pub w_selfcol: f64,
    pub w_envcol: f64,
    pub margin: f64,
}

impl From<&OptimizerParams> for DiffWeights {
    fn from(p: &OptimizerParams) -> Self {
        Self {
            w_length: p.w_length,
            w_selfcol: p.w_selfcol,
            w_envcol: p.w_envcol,
            margin: p.margin,
        }
    }
}

/// Collision hinges of one timestep: `(residual, gradient of residual)`.
struct HingeRows {
    residual: Vec<f64>,
    /// Rows of the residual Jacobian, zero for inactive hinges.
    jacobian: Vec<DVector<f64>>,
}

fn timestep_hinges(
    chain: &KinematicChain,
    state: &ChainState,
    obstacles: &[Cuboid],
    weights: &DiffWeights,
    with_jacobian: bool,
) -> HingeRows {
    let entries = collision_entries(chain, state, obstacles);
    let n_self = chain.self_collision_pairs().len();
    let d = chain.dof();
    let mut residual = Vec::with_capacity(entries.len());
    let mut jacobian = Vec::new();
    let mut grad = alloc::vec![0.0; d];
    for (idx, e) in entries.iter().enumerate() {
        let w = if idx < n_self {
            weights.w_selfcol
        } else {
            weights.w_envcol
        };
        let active = e.result.distance < weights.margin;
        residual.push(if active {
            w * (weights.margin - e.result.distance)
        } else {
            0.0
        });
        if with_jacobian {
            if active {
                entry_gradient(state, e, &mut grad);
                jacobian.push(DVector::from_iterator(d, grad.iter().map(|g| -w * g)));
            } else {
                jacobian.push(DVector::zeros(d));
            }
        }
    }
    HingeRows { residual, jacobian }
}

/// Differencing terms followed by the self hinges of every timestep, then
/// the environment hinges of every timestep.
pub fn residual_diff(
    chain: &KinematicChain,
    traj: &Trajectory,
    obstacles: &[Cuboid],
    weights: &DiffWeights,
) -> Result<DVector<f64>, OptimizeError> {
    traj.check(chain)?;
    if traj.len() < 2 {
        return Err(OptimizeError::TooShort);
    }
    let (n, d) = (traj.len(), chain.dof());
    let n_self = chain.self_collision_pairs().len();
    let n_col = collision_entry_count(chain, obstacles);
    let n_env = n_col - n_self;
    let mut r = DVector::zeros((n - 1) * d + n * n_col);
    for i in 0..n - 1 {
        let delta = (&traj.configs()[i + 1] - &traj.configs()[i]) * weights.w_length;
        r.rows_mut(i * d, d).copy_from(&delta);
    }
    let base = (n - 1) * d;
    for (i, q) in traj.configs().iter().enumerate() {
        let h = timestep_hinges(chain, &chain.state_unchecked(q), obstacles, weights, false);
        for (k, v) in h.residual.iter().enumerate() {
            let row = if k < n_self {
                base + i * n_self + k
            } else {
                base + n * n_self + i * n_env + (k - n_self)
            };
            r[row] = *v;
        }
    }
    Ok(r)
}

/// Sparse Jacobian of [`residual_diff`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiffJacobian {
    pub n: usize,
    pub d: usize,
    pub w_length: f64,
    /// Collision rows in residual order: `(timestep, d(residual)/dq_timestep)`.
    pub collision_rows: Vec<(usize, DVector<f64>)>,
}

impl DiffJacobian {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, d) = (self.n, self.d);
        let rows = (n - 1) * d + self.collision_rows.len();
        let mut m = DMatrix::zeros(rows, n * d);
        for i in 0..n - 1 {
            for k in 0..d {
                m[(i * d + k, i * d + k)] = -self.w_length;
                m[(i * d + k, (i + 1) * d + k)] = self.w_length;
            }
        }
        for (r, (step, row)) in self.collision_rows.iter().enumerate() {
            for k in 0..d {
                m[((n - 1) * d + r, step * d + k)] = row[k];
            }
        }
        m
    }
}

pub fn jacobian_diff(
    chain: &KinematicChain,
    traj: &Trajectory,
    obstacles: &[Cuboid],
    weights: &DiffWeights,
) -> Result<DiffJacobian, OptimizeError> {
    traj.check(chain)?;
    if traj.len() < 2 {
        return Err(OptimizeError::TooShort);
    }
    let (n, d) = (traj.len(), chain.dof());
    let n_self = chain.self_collision_pairs().len();
    let mut self_rows = Vec::new();
    let mut env_rows = Vec::new();
    for (i, q) in traj.configs().iter().enumerate() {
        let h = timestep_hinges(chain, &chain.state_unchecked(q), obstacles, weights, true);
        for (k, row) in h.jacobian.into_iter().enumerate() {
            if k < n_self {
                self_rows.push((i, row));
            } else {
                env_rows.push((i, row));
            }
        }
    }
    self_rows.extend(env_rows);
    Ok(DiffJacobian {
        n,
        d,
        w_length: weights.w_length,
        collision_rows: self_rows,
    })
}

/// One damped Gauss-Newton update `(J'J + lambda I) dx = J'r`,
/// `x' = clamp(x - dx)`, on a flattened trajectory. Singular systems raise
/// the damping tenfold until it exceeds `lambda_max`.
pub fn lm_step(
    chain: &KinematicChain,
    traj: &Trajectory,
    residual: &DVector<f64>,
    jacobian: &DMatrix<f64>,
    lambda: f64,
    lambda_max: f64,
) -> Result<Trajectory, OptimizeError> {
    traj.check(chain)?;
    let (n, d) = (traj.len(), chain.dof());
    if jacobian.ncols() != n * d || jacobian.nrows() != residual.len() {
        return Err(OptimizeError::Shape("jacobian"));
    }
    let jtj = jacobian.transpose() * jacobian;
    let jtr = jacobian.transpose() * residual;
    let mut lambda = lambda;
    let delta = loop {
        let a = &jtj + DMatrix::identity(n * d, n * d) * lambda;
        if let Some(x) = solve_spd(a, &jtr) {
            break x;
        }
        lambda *= 10.0;
        if !(lambda <= lambda_max) {
            return Err(OptimizeError::Singular);
        }
    };
    let configs = traj
        .configs()
        .iter()
        .enumerate()
        .map(|(i, q)| chain.clamp_to_limits(&(q - delta.rows(i * d, d))))
        .collect();
    Ok(Trajectory::new(configs))
}

/// A snapshot handed out by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub time: f64,
    pub trajectory: Trajectory,
    pub report: ValidityReport,
    pub length_rad: f64,
    pub length_m: f64,
}

impl Emission {
    pub fn valid(&self) -> bool {
        self.report.valid()
    }

    pub fn score(&self) -> f64 {
        length_score((self.length_rad, self.length_m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeOutcome {
    /// The pose phase could not reach the tolerance from the seed.
    PoseFailure,
    /// Pose converged but no trajectory ever satisfied every constraint.
    NoValidSolution,
    /// Best length stopped improving.
    Stalled,
    MaxCycles,
    Deadline,
}

impl OptimizeOutcome {
    pub fn is_failure(&self) -> bool {
        matches!(self, OptimizeOutcome::PoseFailure | OptimizeOutcome::NoValidSolution)
    }
}

/// Anytime optimizer state. Call [`Optimizer::run`] to drive it.
#[derive(Debug)]
pub struct Optimizer<'a> {
    chain: &'a KinematicChain,
    targets: &'a [Pose],
    obstacles: &'a [Cuboid],
    params: OptimizerParams,
    current: Trajectory,
    pose_lambda: Vec<f64>,
    diff_lambda: f64,
    best: Option<Emission>,
    /// Best score at the last counted improvement.
    stall_reference: f64,
    pose_iterations: usize,
    cycles: usize,
}

impl<'a> Optimizer<'a> {
    pub fn new(
        chain: &'a KinematicChain,
        targets: &'a [Pose],
        obstacles: &'a [Cuboid],
        seed: Trajectory,
        params: OptimizerParams,
    ) -> Result<Self, OptimizeError> {
        check_shapes(chain, &seed, targets)?;
        if seed.len() < 2 {
            return Err(OptimizeError::TooShort);
        }
        let mut current = seed;
        for q in current.configs_mut() {
            chain.clamp_in_place(q);
        }
        Ok(Self {
            chain,
            targets,
            obstacles,
            params,
            pose_lambda: alloc::vec![params.lambda_init; current.len()],
            current,
            diff_lambda: params.diff_lambda_init,
            best: None,
            stall_reference: f64::infinity(),
            pose_iterations: 0,
            cycles: 0,
        })
    }

    pub fn current(&self) -> &Trajectory {
        &self.current
    }

    /// Shortest valid trajectory emitted so far.
    pub fn best(&self) -> Option<&Emission> {
        self.best.as_ref()
    }

    /// Accepted plus rejected pose-phase iterations so far.
    pub fn pose_iterations(&self) -> usize {
        self.pose_iterations
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    fn pose_ok(&self, pose: &Pose, target: &Pose) -> bool {
        let (pos, rot) = pose_error(pose, target);
        pos <= self.params.pos_threshold && rot <= self.params.rot_threshold
    }

    /// Pose-only LM until every waypoint is within tolerance. Each waypoint
    /// is an independent block with its own damping; a block step is kept
    /// only when it lowers that block's residual.
    pub fn pose_phase(&mut self, max_iters: usize) -> bool {
        let chain = self.chain;
        let p = self.params;
        let mut states: Vec<ChainState> = self
            .current
            .configs()
            .iter()
            .map(|q| chain.state_unchecked(q))
            .collect();
        for it in 0..=max_iters {
            let mut all_ok = true;
            for i in 0..states.len() {
                let pose = states[i].end_effector();
                let target = &self.targets[i];
                if self.pose_ok(&pose, target) {
                    continue;
                }
                all_ok = false;
                if it == max_iters {
                    break;
                }
                let r = pose_residual_block(&pose, target);
                let jac = pose_block_jacobian(&states[i]);
                let jtj = jac.transpose() * &jac;
                let jtr = jac.transpose() * r;
                let d = jtj.nrows();
                let lambda = self.pose_lambda[i];
                self.pose_iterations += 1;
                let Some(delta) = solve_spd(jtj + DMatrix::identity(d, d) * lambda, &jtr) else {
                    self.pose_lambda[i] = (lambda * p.lambda_increase).min(p.lambda_max);
                    continue;
                };
                let mut trial = &self.current.configs()[i] - delta;
                chain.clamp_in_place(&mut trial);
                let trial_state = chain.state_unchecked(&trial);
                let trial_r = pose_residual_block(&trial_state.end_effector(), target);
                if trial_r.norm() < r.norm() {
                    self.current.configs_mut()[i] = trial;
                    states[i] = trial_state;
                    self.pose_lambda[i] = (lambda * p.lambda_decrease).max(p.lambda_min);
                } else {
                    self.pose_lambda[i] = (lambda * p.lambda_increase).min(p.lambda_max);
                }
            }
            if all_ok {
                return true;
            }
        }
        false
    }

    /// One damped step on the length and collision residual.
    pub fn diff_step(&mut self) -> Result<(), OptimizeError> {
        let chain = self.chain;
        let weights = DiffWeights::from(&self.params);
        let (n, d) = (self.current.len(), chain.dof());
        let w2 = weights.w_length * weights.w_length;
        let mut diag = Vec::with_capacity(n);
        let mut rhs = Vec::with_capacity(n);
        for (i, q) in self.current.configs().iter().enumerate() {
            let degree = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            let mut block = DMatrix::identity(d, d) * (w2 * degree + self.diff_lambda);
            let mut g = DVector::zeros(d);
            if i > 0 {
                g += (q - &self.current.configs()[i - 1]) * w2;
            }
            if i + 1 < n {
                g -= (&self.current.configs()[i + 1] - q) * w2;
            }
            let h = timestep_hinges(chain, &chain.state_unchecked(q), self.obstacles, &weights, true);
            for (res, row) in h.residual.iter().zip(&h.jacobian) {
                if *res != 0.0 {
                    block += row * row.transpose();
                    g += row * *res;
                }
            }
            diag.push(block);
            rhs.push(g);
        }
        let mut lambda = self.diff_lambda;
        let delta = loop {
            if let Some(x) = solve_block_tridiagonal(&diag, -w2, &rhs) {
                break x;
            }
            let bump = lambda * (self.params.lambda_increase - 1.0);
            lambda += bump;
            if lambda > self.params.lambda_max {
                return Err(OptimizeError::Singular);
            }
            for b in diag.iter_mut() {
                for k in 0..d {
                    b[(k, k)] += bump;
                }
            }
        };
        for (q, dq) in self.current.configs_mut().iter_mut().zip(delta) {
            *q -= dq;
            chain.clamp_in_place(q);
        }
        Ok(())
    }

    fn emit(&mut self, clock: &dyn Clock, on_emit: &mut dyn FnMut(&Emission)) -> (bool, bool) {
        let report = validate(&self.current, self.targets, self.chain, self.obstacles, &self.params)
            .expect("shapes fixed at construction");
        let (length_rad, length_m) = trajectory_length(self.chain, &self.current);
        let emission = Emission {
            time: clock.now(),
            trajectory: self.current.clone(),
            report,
            length_rad,
            length_m,
        };
        on_emit(&emission);
        let mut improved = false;
        let mut accepted = false;
        if emission.valid() {
            let score = emission.score();
            accepted = self.best.as_ref().map_or(true, |b| score <= b.score());
            if score < self.stall_reference * (1.0 - self.params.stall_tolerance) {
                self.stall_reference = score;
                improved = true;
            }
            if accepted {
                self.best = Some(emission);
            }
        }
        (accepted, improved)
    }

    /// Runs until the deadline (absolute clock time), the cycle cap, a stall,
    /// or a failure. Every pose-converged iterate is passed to `on_emit`; the
    /// very first iterate is emitted even when the pose phase fails.
    pub fn run(
        &mut self,
        clock: &dyn Clock,
        deadline: f64,
        on_emit: &mut dyn FnMut(&Emission),
    ) -> Result<OptimizeOutcome, OptimizeError> {
        let first_ok = self.pose_phase(self.params.initial_pose_iters);
        self.emit(clock, on_emit);
        if !first_ok {
            return Ok(OptimizeOutcome::PoseFailure);
        }
        let mut since_improvement = 0;
        loop {
            if clock.now() >= deadline {
                return Ok(self.finish(OptimizeOutcome::Deadline));
            }
            if self.cycles >= self.params.max_cycles {
                return Ok(self.finish(OptimizeOutcome::MaxCycles));
            }
            if since_improvement >= self.params.stall_cycles {
                return Ok(self.finish(OptimizeOutcome::Stalled));
            }
            self.cycles += 1;
            let anchor = self.current.clone();
            self.diff_step()?;
            if !self.pose_phase(self.params.recover_pose_iters) {
                // Too large a step to recover from: back off and retry.
                self.current = self.best.as_ref().map_or(anchor, |b| b.trajectory.clone());
                self.pose_lambda.iter_mut().for_each(|l| *l = self.params.lambda_init);
                self.diff_lambda = (self.diff_lambda * self.params.lambda_increase).min(self.params.lambda_max);
                since_improvement += 1;
                continue;
            }
            let (accepted, improved) = self.emit(clock, on_emit);
            if accepted {
                self.diff_lambda = (self.diff_lambda * self.params.lambda_decrease).max(self.params.lambda_min);
            }
            if improved {
                since_improvement = 0;
            } else {
                since_improvement += 1;
            }
        }
    }

    fn finish(&self, outcome: OptimizeOutcome) -> OptimizeOutcome {
        if self.best.is_none() {
            OptimizeOutcome::NoValidSolution
        } else {
            outcome
        }
    }
}

/// Collected output of a full optimizer run.
#[derive(Debug, Clone)]
pub struct OptimizeRun {
    pub emissions: Vec<Emission>,
    pub best: Option<Emission>,
    pub outcome: OptimizeOutcome,
}

/// Runs the optimizer from `seed` and collects every emission.
pub fn optimize(
    chain: &KinematicChain,
    seed: Trajectory,
    targets: &[Pose],
    obstacles: &[Cuboid],
    params: OptimizerParams,
    clock: &dyn Clock,
    deadline: f64,
) -> Result<OptimizeRun, OptimizeError> {
    let mut opt = Optimizer::new(chain, targets, obstacles, seed, params)?;
    let mut emissions = Vec::new();
    let outcome = opt.run(clock, deadline, &mut |e| emissions.push(e.clone()))?;
    Ok(OptimizeRun {
        emissions,
        best: opt.best().cloned(),
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Isometry3, Vector3};

    use crate::kinematics::JointSpec;

    fn planar2() -> KinematicChain {
        let joints = alloc::vec![
            JointSpec::revolute("a", Isometry3::identity(), Vector3::z(), -3.0, 3.0),
            JointSpec::revolute("b", Isometry3::translation(0.5, 0.0, 0.0), Vector3::z(), -3.0, 3.0),
            JointSpec::fixed("tool", Isometry3::translation(0.4, 0.0, 0.0)),
        ];
        KinematicChain::new("planar2", joints, Vec::new(), []).unwrap()
    }

    fn traj(values: &[[f64; 2]]) -> Trajectory {
        Trajectory::new(values.iter().map(|v| Config::from_column_slice(v)).collect())
    }

    #[test]
    fn exact_fk_gives_zero_pose_residual() {
        let chain = planar2();
        let t = traj(&[[0.1, 0.2], [0.3, -0.4]]);
        let targets = chain.fk_batch(t.configs()).unwrap();
        assert!(residual_pose(&chain, &t, &targets).unwrap().amax() < 1e-15);
    }

    #[test]
    fn position_offset_single_entry() {
        let chain = planar2();
        let t = traj(&[[0.1, 0.2], [0.3, -0.4]]);
        let mut targets = chain.fk_batch(t.configs()).unwrap();
        targets[1].position.x -= 1e-3;
        let r = residual_pose(&chain, &t, &targets).unwrap();
        for (k, v) in r.iter().enumerate() {
            if k == 6 {
                assert!((v - 1e-3).abs() < 1e-15);
            } else {
                assert!(v.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn yaw_wraps() {
        let a = Pose::from_xyz_rpy([0.0; 3], [0.0, 0.0, 175f64.to_radians()]);
        let b = Pose::from_xyz_rpy([0.0; 3], [0.0, 0.0, -175f64.to_radians()]);
        let r = pose_residual_block(&a, &b);
        assert!((r[5] + 10f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn diff_residual_examples() {
        let chain = planar2();
        let w = DiffWeights {
            w_length: 2.0,
            w_selfcol: 10.0,
            w_envcol: 10.0,
            margin: 0.01,
        };
        let flat = traj(&[[0.1, 0.2]; 3]);
        assert_eq!(residual_diff(&chain, &flat, &[], &w).unwrap().amax(), 0.0);
        let step = traj(&[[0.1, 0.2], [0.1, 0.25], [0.1, 0.25]]);
        let r = residual_diff(&chain, &step, &[], &w).unwrap();
        assert_eq!(r.len(), 4);
        assert!((r[1] - 0.1).abs() < 1e-12);
        assert_eq!(r.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn diff_jacobian_is_signed_identity() {
        let chain = planar2();
        let w = DiffWeights {
            w_length: 1.5,
            w_selfcol: 10.0,
            w_envcol: 10.0,
            margin: 0.01,
        };
        let t = traj(&[[0.1, 0.2], [0.2, 0.1], [0.0, 0.3]]);
        let j = jacobian_diff(&chain, &t, &[], &w).unwrap().to_dense();
        assert_eq!(j.shape(), (4, 6));
        for r in 0..4 {
            for c in 0..6 {
                let expect = if c == r {
                    -1.5
                } else if c == r + 2 {
                    1.5
                } else {
                    0.0
                };
                assert_eq!(j[(r, c)], expect);
            }
        }
    }

    #[test]
    fn zero_residual_is_fixed_point() {
        let chain = planar2();
        let t = traj(&[[0.1, 0.2], [0.3, -0.4]]);
        let j = DMatrix::from_fn(5, 4, |r, c| (r + 2 * c) as f64 * 0.1);
        let out = lm_step(&chain, &t, &DVector::zeros(5), &j, 1e-4, 1e6).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn validate_thresholds() {
        let chain = planar2();
        let t = traj(&[[0.1, 0.2], [0.1 + 7.5f64.to_radians(), 0.2]]);
        let targets = chain.fk_batch(t.configs()).unwrap();
        let params = OptimizerParams::default();
        let rep = validate(&t, &targets, &chain, &[], &params).unwrap();
        assert!(rep.pose_ok && rep.limits_ok && rep.collision_ok);
        assert!(!rep.steps_ok);
        let ok = traj(&[[0.1, 0.2], [0.1 + 6.5f64.to_radians(), 0.2]]);
        let targets = chain.fk_batch(ok.configs()).unwrap();
        assert!(validate(&ok, &targets, &chain, &[], &params).unwrap().valid());
    }
}
