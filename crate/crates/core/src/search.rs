//! Global discrete search over a layered graph of candidate configurations.
//!
//! Layer `i` holds the `i`-th configuration of every candidate plan and
//! every node connects to every node of the next layer. A path is scored by
//! the sum of its node penalties (joint-limit proximity, collision) and,
//! second, by its largest normalized joint step. Penalties are compared
//! first, so any penalty-free path beats every penalized one.

use alloc::vec::Vec;
use core::cmp::Ordering;

use num_traits::Float;
use thiserror::Error;

use crate::generator::CandidateSet;
use crate::geometry::{in_collision, Cuboid};
use crate::kinematics::{Config, JointKind, KinematicChain};
use crate::optimizer::Trajectory;

pub const LIMIT_PENALTY: f64 = 10.0;
pub const COLLISION_PENALTY: f64 = 100.0;

/// Revolute proximity band (1.5 degrees) for the joint-limit penalty.
pub const LIMIT_MARGIN_REVOLUTE: f64 = 1.5 * core::f64::consts::PI / 180.0;
pub const LIMIT_MARGIN_PRISMATIC: f64 = 0.03;

/// Per-step discontinuity limits (7 degrees, 2 cm), used to normalize edges.
pub const STEP_LIMIT_REVOLUTE: f64 = 7.0 * core::f64::consts::PI / 180.0;
pub const STEP_LIMIT_PRISMATIC: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("trajectory needs at least two timesteps, got {0}")]
    TooShort(usize),
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("configuration dimension {got} does not match chain dof {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Lexicographic cost: accumulated node penalty, then worst normalized step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchCost {
    pub penalty: f64,
    pub mjac_norm: f64,
}

impl SearchCost {
    pub const ZERO: SearchCost = SearchCost {
        penalty: 0.0,
        mjac_norm: 0.0,
    };

    fn extend(self, node_penalty: f64, edge: f64) -> SearchCost {
        SearchCost {
            penalty: self.penalty + node_penalty,
            mjac_norm: self.mjac_norm.max(edge),
        }
    }
}

impl Eq for SearchCost {}

impl PartialOrd for SearchCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SearchCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.penalty
            .total_cmp(&other.penalty)
            .then(self.mjac_norm.total_cmp(&other.mjac_norm))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Chosen plan per timestep.
    pub indices: Vec<usize>,
    pub trajectory: Trajectory,
    pub cost: SearchCost,
}

/// Largest absolute per-step change over revolute joints (radians) and over
/// prismatic joints (meters).
pub fn mjac(configs: &[Config], chain: &KinematicChain) -> Result<(f64, f64), SearchError> {
    if configs.len() < 2 {
        return Err(SearchError::TooShort(configs.len()));
    }
    let kinds = chain.kinds();
    let mut rev: f64 = 0.0;
    let mut pris: f64 = 0.0;
    for pair in configs.windows(2) {
        for (j, kind) in kinds.iter().enumerate() {
            let delta = (pair[1][j] - pair[0][j]).abs();
            match kind {
                JointKind::Prismatic => pris = pris.max(delta),
                _ => rev = rev.max(delta),
            }
        }
    }
    Ok((rev, pris))
}

/// Per-joint normalization scale for edge costs.
pub fn step_scales(chain: &KinematicChain) -> Vec<f64> {
    chain
        .kinds()
        .iter()
        .map(|k| match k {
            JointKind::Prismatic => STEP_LIMIT_PRISMATIC,
            _ => STEP_LIMIT_REVOLUTE,
        })
        .collect()
}

/// Largest joint change between two configurations, in units of the
/// per-kind discontinuity limit.
pub fn edge_cost(a: &Config, b: &Config, chain: &KinematicChain) -> f64 {
    let scales = step_scales(chain);
    a.iter()
        .zip(b.iter())
        .zip(scales.iter())
        .map(|((x, y), s)| (x - y).abs() / s)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeFlags {
    pub near_limit: bool,
    pub colliding: bool,
}

impl NodeFlags {
    pub fn penalty(&self) -> f64 {
        let mut p = 0.0;
        if self.near_limit {
            p += LIMIT_PENALTY;
        }
        if self.colliding {
            p += COLLISION_PENALTY;
        }
        p
    }
}

pub fn node_flags(q: &Config, chain: &KinematicChain, obstacles: &[Cuboid]) -> NodeFlags {
    let near_limit = chain.kinds().iter().enumerate().any(|(j, kind)| {
        let margin = match kind {
            JointKind::Prismatic => LIMIT_MARGIN_PRISMATIC,
            _ => LIMIT_MARGIN_REVOLUTE,
        };
        q[j] - chain.lower()[j] < margin || chain.upper()[j] - q[j] < margin
    });
    let state = chain.state_unchecked(q);
    NodeFlags {
        near_limit,
        colliding: in_collision(chain, &state, obstacles),
    }
}

/// 0, 10, 100 or 110.
pub fn node_penalty(q: &Config, chain: &KinematicChain, obstacles: &[Cuboid]) -> f64 {
    node_flags(q, chain, obstacles).penalty()
}

/// Lazily filled node checks keyed by (plan, timestep).
#[derive(Debug, Clone, Default)]
pub struct NodeCache {
    flags: Vec<Vec<Option<NodeFlags>>>,
    n: usize,
    pub(crate) evaluations: usize,
}

impl NodeCache {
    pub(crate) fn new(k: usize, n: usize) -> Self {
        Self {
            flags: alloc::vec![alloc::vec![None; n]; k],
            n,
            evaluations: 0,
        }
    }

    pub(crate) fn grow(&mut self, k: usize) {
        while self.flags.len() < k {
            self.flags.push(alloc::vec![None; self.n]);
        }
    }

    pub(crate) fn filled(&self) -> usize {
        self.flags.iter().flatten().filter(|f| f.is_some()).count()
    }

    pub fn get(&self, plan: usize, step: usize) -> Option<NodeFlags> {
        self.flags[plan][step]
    }
}

impl CandidateSet {
    /// Cached flags for a node, computing them on first use.
    pub fn node_flags(&mut self, plan: usize, step: usize, chain: &KinematicChain, obstacles: &[Cuboid]) -> NodeFlags {
        if let Some(f) = self.cache.get(plan, step) {
            return f;
        }
        let f = node_flags(&self.plans()[plan][step], chain, obstacles);
        self.cache.flags[plan][step] = Some(f);
        self.cache.evaluations += 1;
        f
    }

    pub fn node_cache(&self) -> &NodeCache {
        &self.cache
    }
}

/// Exact minimizer of [`SearchCost`] over all interleavings of the candidates.
///
/// Ties are broken toward the lowest plan index, both for the final node and
/// at every backtracking step.
pub fn dp_search(
    candidates: &mut CandidateSet,
    chain: &KinematicChain,
    obstacles: &[Cuboid],
) -> Result<SearchResult, SearchError> {
    let k = candidates.k();
    let n = candidates.n();
    if k == 0 {
        return Err(SearchError::NoCandidates);
    }
    if n < 2 {
        return Err(SearchError::TooShort(n));
    }
    if candidates.d() != chain.dof() {
        return Err(SearchError::Dimension {
            expected: chain.dof(),
            got: candidates.d(),
        });
    }
    let d = chain.dof();
    let prismatic: Vec<bool> = chain.kinds().iter().map(|k| *k == JointKind::Prismatic).collect();

    let mut penalties = alloc::vec![0.0; k * n];
    for plan in 0..k {
        for step in 0..n {
            penalties[plan * n + step] = candidates.node_flags(plan, step, chain, obstacles).penalty();
        }
    }

    // Joint values laid out per layer.
    let flat: Vec<f64> = (0..n)
        .flat_map(|step| {
            let plans = candidates.plans();
            (0..k).flat_map(move |plan| plans[plan][step].iter().copied())
        })
        .collect();
    let layer = |step: usize, plan: usize| &flat[(step * k + plan) * d..(step * k + plan + 1) * d];

    let mut cost: Vec<SearchCost> = (0..k)
        .map(|plan| SearchCost {
            penalty: penalties[plan * n],
            mjac_norm: 0.0,
        })
        .collect();
    let mut back = alloc::vec![0u32; k * n];
    let mut next = alloc::vec![SearchCost::ZERO; k];
    for step in 1..n {
        for to in 0..k {
            let target = layer(step, to);
            let node_pen = penalties[to * n + step];
            let mut best = SearchCost {
                penalty: f64::infinity(),
                mjac_norm: f64::infinity(),
            };
            let mut best_from = 0;
            for from in 0..k {
                // Cannot improve on penalty alone: skip the edge computation.
                if cost[from].penalty > best.penalty {
                    continue;
                }
                let source = layer(step - 1, from);
                let (mut rev, mut pris): (f64, f64) = (0.0, 0.0);
                for j in 0..d {
                    let delta = (target[j] - source[j]).abs();
                    if prismatic[j] {
                        pris = pris.max(delta);
                    } else {
                        rev = rev.max(delta);
                    }
                }
                // Rounded division is monotone, so this equals the per-joint
                // maximum of `edge_cost` bit for bit.
                let edge = (rev / STEP_LIMIT_REVOLUTE).max(pris / STEP_LIMIT_PRISMATIC);
                let c = cost[from].extend(node_pen, edge);
                if c < best {
                    best = c;
                    best_from = from;
                }
            }
            next[to] = best;
            back[step * k + to] = best_from as u32;
        }
        core::mem::swap(&mut cost, &mut next);
    }

    let mut end = 0;
    for plan in 1..k {
        if cost[plan] < cost[end] {
            end = plan;
        }
    }
    let mut indices = alloc::vec![0usize; n];
    indices[n - 1] = end;
    for step in (1..n).rev() {
        indices[step - 1] = back[step * k + indices[step]] as usize;
    }
    let configs = indices
        .iter()
        .enumerate()
        .map(|(step, &plan)| candidates.plans()[plan][step].clone())
        .collect();
    Ok(SearchResult {
        indices,
        trajectory: Trajectory::new(configs),
        cost: cost[end],
    })
}
