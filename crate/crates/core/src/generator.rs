//! Candidate motion plans from a latent-conditioned IK model.
//!
//! A [`GenerativeIk`] maps a latent vector and a sequence of target poses to
//! one joint configuration per pose. Holding the latent fixed along the path
//! yields a slowly varying plan; drawing many latents yields a diverse set
//! of plans for the search stage to interleave.

use alloc::vec::Vec;

use nalgebra::{DVector, Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kinematics::{pose_error, ChainState, Config, KinematicChain, Pose};
use crate::search::NodeCache;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("at least one latent is required")]
    NoLatents,
    #[error("target path is empty")]
    EmptyPath,
    #[error("target pose {0} is not finite")]
    NonFinitePose(usize),
    #[error("latent has {got} components, generator expects {expected}")]
    LatentDim { expected: usize, got: usize },
    #[error("latent component outside [0, 1]")]
    LatentRange,
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("no stored plan with index {0}")]
    PlanIndex(usize),
}

/// Ordered target poses `y_1..y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPath {
    poses: Vec<Pose>,
}

impl TargetPath {
    pub fn new(poses: Vec<Pose>) -> Result<Self, GeneratorError> {
        if poses.is_empty() {
            return Err(GeneratorError::EmptyPath);
        }
        for (i, p) in poses.iter().enumerate() {
            let finite = p.position.iter().all(|v| v.is_finite())
                && p.orientation.coords.iter().all(|v| v.is_finite());
            if !finite {
                return Err(GeneratorError::NonFinitePose(i));
            }
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// A point in the unit hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent(Vec<f64>);

impl Latent {
    pub fn new(z: Vec<f64>) -> Result<Self, GeneratorError> {
        if z.iter().all(|v| (0.0..=1.0).contains(v)) {
            Ok(Self(z))
        } else {
            Err(GeneratorError::LatentRange)
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Deterministic stream of uniform latents. Densification keeps drawing
/// from the same stream, so extra plans never repeat earlier ones.
#[derive(Debug, Clone)]
pub struct LatentSampler {
    rng: ChaCha8Rng,
    dim: usize,
}

impl LatentSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            dim,
        }
    }

    pub fn next_latent(&mut self) -> Latent {
        Latent((0..self.dim).map(|_| self.rng.random::<f64>()).collect())
    }

    pub fn take(&mut self, count: usize) -> Result<Vec<Latent>, GeneratorError> {
        if count == 0 {
            return Err(GeneratorError::NoLatents);
        }
        Ok((0..count).map(|_| self.next_latent()).collect())
    }
}

pub fn sample_latents(dim: usize, count: usize, seed: u64) -> Result<Vec<Latent>, GeneratorError> {
    LatentSampler::new(dim, seed).take(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Within the generator's own tolerance.
    Converged,
    /// Returned anyway; downstream stages may repair it.
    Approximate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub q: Config,
    pub status: SolveStatus,
}

pub trait GenerativeIk {
    /// Configuration dimension of the returned solutions.
    fn dof(&self) -> usize;

    /// One solution per pose for latent number `plan_index`.
    fn generate_plan(
        &self,
        plan_index: usize,
        latent: &Latent,
        poses: &[Pose],
    ) -> Result<Vec<IkSolution>, GeneratorError>;
}

/// `K` plans of `n` configurations each, plus the per-node check cache used
/// by the search.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    plans: Vec<Vec<Config>>,
    latents: Vec<Latent>,
    status: Vec<Vec<SolveStatus>>,
    pub(crate) cache: NodeCache,
}

impl CandidateSet {
    /// Wraps precomputed plans; every plan must have the same length and dimension.
    pub fn from_plans(plans: Vec<Vec<Config>>, latents: Vec<Latent>) -> Result<Self, GeneratorError> {
        if plans.is_empty() {
            return Err(GeneratorError::NoLatents);
        }
        if latents.len() != plans.len() {
            return Err(GeneratorError::Shape {
                what: "latent count",
                expected: plans.len(),
                got: latents.len(),
            });
        }
        let n = plans[0].len();
        let d = plans[0].first().map_or(0, |q| q.len());
        for plan in &plans {
            if plan.len() != n {
                return Err(GeneratorError::Shape {
                    what: "plan length",
                    expected: n,
                    got: plan.len(),
                });
            }
            if let Some(q) = plan.iter().find(|q| q.len() != d) {
                return Err(GeneratorError::Shape {
                    what: "configuration dimension",
                    expected: d,
                    got: q.len(),
                });
            }
        }
        let status = plans
            .iter()
            .map(|p| alloc::vec![SolveStatus::Converged; p.len()])
            .collect();
        let cache = NodeCache::new(plans.len(), n);
        Ok(Self {
            plans,
            latents,
            status,
            cache,
        })
    }

    pub fn k(&self) -> usize {
        self.plans.len()
    }

    pub fn n(&self) -> usize {
        self.plans.first().map_or(0, |p| p.len())
    }

    pub fn d(&self) -> usize {
        self.plans
            .first()
            .and_then(|p| p.first())
            .map_or(0, |q| q.len())
    }

    pub fn plans(&self) -> &[Vec<Config>] {
        &self.plans
    }

    pub fn latents(&self) -> &[Latent] {
        &self.latents
    }

    pub fn status(&self) -> &[Vec<SolveStatus>] {
        &self.status
    }

    /// Node checks computed so far (cache misses), across all searches.
    pub fn penalty_evaluations(&self) -> usize {
        self.cache.evaluations
    }

    /// Node checks already cached.
    pub fn cached_nodes(&self) -> usize {
        self.cache.filled()
    }

    /// Appends plans for more latents; cached checks of existing plans are kept.
    pub fn extend(
        &mut self,
        gen: &dyn GenerativeIk,
        path: &TargetPath,
        latents: Vec<Latent>,
    ) -> Result<(), GeneratorError> {
        let offset = self.plans.len();
        for (i, z) in latents.iter().enumerate() {
            let sols = gen.generate_plan(offset + i, z, path.poses())?;
            check_plan_shape(&sols, path.len(), gen.dof())?;
            self.status.push(sols.iter().map(|s| s.status).collect());
            self.plans.push(sols.into_iter().map(|s| s.q).collect());
        }
        self.latents.extend(latents);
        self.cache.grow(self.plans.len());
        Ok(())
    }
}

fn check_plan_shape(sols: &[IkSolution], n: usize, d: usize) -> Result<(), GeneratorError> {
    if sols.len() != n {
        return Err(GeneratorError::Shape {
            what: "plan length",
            expected: n,
            got: sols.len(),
        });
    }
    if let Some(s) = sols.iter().find(|s| s.q.len() != d) {
        return Err(GeneratorError::Shape {
            what: "configuration dimension",
            expected: d,
            got: s.q.len(),
        });
    }
    Ok(())
}

/// Runs the generator once per latent over the whole path.
pub fn generate_candidates(
    gen: &dyn GenerativeIk,
    path: &TargetPath,
    latents: Vec<Latent>,
) -> Result<CandidateSet, GeneratorError> {
    if latents.is_empty() {
        return Err(GeneratorError::NoLatents);
    }
    let mut set = CandidateSet {
        plans: Vec::with_capacity(latents.len()),
        latents: Vec::new(),
        status: Vec::new(),
        cache: NodeCache::new(0, path.len()),
    };
    set.extend(gen, path, latents)?;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlsParams {
    pub max_iters: usize,
    /// Convergence tolerance, meters.
    pub pos_tol: f64,
    /// Convergence tolerance, radians.
    pub rot_tol: f64,
    pub initial_damping: f64,
    /// Largest per-joint change in a single iteration.
    pub max_step: f64,
}

impl Default for DlsParams {
    fn default() -> Self {
        Self {
            max_iters: 50,
            pos_tol: 1e-3,
            rot_tol: 0.5f64.to_radians(),
            initial_damping: 1e-3,
            max_step: 0.25,
        }
    }
}

/// Latent-seeded damped-least-squares path tracker.
///
/// The latent picks a seed configuration by mapping the unit hypercube
/// affinely onto the joint limits. The first pose is solved from that seed
/// and every later pose from the previous solution, so a plan inherits the
/// continuity of the path and nearby latents give nearby plans.
#[derive(Debug, Clone)]
pub struct DlsTracker<'a> {
    chain: &'a KinematicChain,
    params: DlsParams,
}

pub fn default_generator(chain: &KinematicChain, params: DlsParams) -> DlsTracker<'_> {
    DlsTracker { chain, params }
}

impl<'a> DlsTracker<'a> {
    pub fn new(chain: &'a KinematicChain, params: DlsParams) -> Self {
        Self { chain, params }
    }

    pub fn seed(&self, latent: &Latent) -> Config {
        let lo = self.chain.lower();
        let hi = self.chain.upper();
        Config::from_iterator(
            lo.len(),
            latent
                .as_slice()
                .iter()
                .enumerate()
                .map(|(j, z)| lo[j] + z * (hi[j] - lo[j])),
        )
    }

    fn converged(&self, current: &Pose, target: &Pose) -> bool {
        let (pos, rot) = pose_error(current, target);
        pos <= self.params.pos_tol && rot <= self.params.rot_tol
    }

    /// DLS step with the columns of joints that sit on a limit and would be
    /// pushed past it removed.
    fn masked_step(&self, q: &Config, state: &ChainState, err: &Vector6<f64>, damping: f64) -> Option<DVector<f64>> {
        let lo = self.chain.lower();
        let hi = self.chain.upper();
        let mut jac = state.jacobian();
        loop {
            let jjt: Matrix6<f64> = &jac * jac.transpose() + Matrix6::identity() * damping;
            let step = jac.transpose() * jjt.cholesky()?.solve(err);
            let mut locked = false;
            for j in 0..q.len() {
                let pushing_out = (q[j] <= lo[j] && step[j] < 0.0) || (q[j] >= hi[j] && step[j] > 0.0);
                if pushing_out && jac.column(j).iter().any(|v| *v != 0.0) {
                    jac.column_mut(j).fill(0.0);
                    locked = true;
                }
            }
            if !locked {
                return Some(step);
            }
        }
    }

    /// Moves `q` toward `target`; returns the status and iterations used.
    pub fn solve_pose(&self, q: &mut Config, target: &Pose) -> (SolveStatus, usize) {
        let chain = self.chain;
        let mut state = chain.state_unchecked(q);
        let mut current = state.end_effector();
        let mut err = twist_error(&current, target);
        let mut damping = self.params.initial_damping;
        for it in 0..self.params.max_iters {
            if self.converged(&current, target) {
                return (SolveStatus::Converged, it);
            }
            let Some(mut step) = self.masked_step(q, &state, &err, damping) else {
                damping *= 10.0;
                continue;
            };
            let largest = step.amax();
            if largest > self.params.max_step {
                step *= self.params.max_step / largest;
            }
            let mut trial = &*q + step;
            chain.clamp_in_place(&mut trial);
            let trial_state = chain.state_unchecked(&trial);
            let trial_pose = trial_state.end_effector();
            let trial_err = twist_error(&trial_pose, target);
            if trial_err.norm() < err.norm() {
                *q = trial;
                state = trial_state;
                current = trial_pose;
                err = trial_err;
                damping = (damping * 0.5).max(1e-9);
            } else {
                damping = (damping * 10.0).min(1e3);
            }
        }
        let status = if self.converged(&current, target) {
            SolveStatus::Converged
        } else {
            SolveStatus::Approximate
        };
        (status, self.params.max_iters)
    }
}

/// Position error and world-frame rotation vector from `current` to `target`.
fn twist_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = (target.orientation * current.orientation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

impl GenerativeIk for DlsTracker<'_> {
    fn dof(&self) -> usize {
        self.chain.dof()
    }

    fn generate_plan(
        &self,
        _plan_index: usize,
        latent: &Latent,
        poses: &[Pose],
    ) -> Result<Vec<IkSolution>, GeneratorError> {
        if latent.len() != self.chain.dof() {
            return Err(GeneratorError::LatentDim {
                expected: self.chain.dof(),
                got: latent.len(),
            });
        }
        let mut q = self.seed(latent);
        let mut out = Vec::with_capacity(poses.len());
        for target in poses {
            let (status, _) = self.solve_pose(&mut q, target);
            out.push(IkSolution {
                q: q.clone(),
                status,
            });
        }
        Ok(out)
    }
}

/// Plans produced elsewhere (for example by a learned model), replayed
/// verbatim. Stored as a flat `K x n x d` array.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredPlans {
    k: usize,
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl StoredPlans {
    pub fn new(k: usize, n: usize, d: usize, data: Vec<f64>) -> Result<Self, GeneratorError> {
        if data.len() != k * n * d {
            return Err(GeneratorError::Shape {
                what: "stored value count",
                expected: k * n * d,
                got: data.len(),
            });
        }
        Ok(Self { k, n, d, data })
    }

    pub fn from_candidates(set: &CandidateSet) -> Self {
        let data = set
            .plans()
            .iter()
            .flat_map(|plan| plan.iter().flat_map(|q| q.iter().copied()))
            .collect();
        Self {
            k: set.k(),
            n: set.n(),
            d: set.d(),
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.k, self.n, self.d)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn config(&self, k: usize, i: usize) -> Config {
        let start = (k * self.n + i) * self.d;
        Config::from_column_slice(&self.data[start..start + self.d])
    }
}

impl GenerativeIk for StoredPlans {
    fn dof(&self) -> usize {
        self.d
    }

    fn generate_plan(
        &self,
        plan_index: usize,
        _latent: &Latent,
        poses: &[Pose],
    ) -> Result<Vec<IkSolution>, GeneratorError> {
        if poses.len() != self.n {
            return Err(GeneratorError::Shape {
                what: "waypoint count",
                expected: self.n,
                got: poses.len(),
            });
        }
        if plan_index >= self.k {
            return Err(GeneratorError::PlanIndex(plan_index));
        }
        Ok((0..self.n)
            .map(|i| IkSolution {
                q: self.config(plan_index, i),
                status: SolveStatus::Converged,
            })
            .collect())
    }
}
