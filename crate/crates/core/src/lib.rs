//! Anytime Cartesian path planning for redundant serial manipulators.
//!
//! The planner works in three stages. A latent-seeded generative IK model
//! proposes `K` candidate joint-space plans that follow the target path,
//! a dynamic-programming search picks the smoothest collision-free
//! interleaving of those plans, and a Levenberg-Marquardt optimizer refines
//! the result until every waypoint is within the pose tolerance and no
//! constraint is violated. The optimizer keeps running after the first valid
//! trajectory and retains the shortest one seen so far.
//!
//! This crate is `no_std` and only needs `alloc`. File formats, the command
//! line and wall-clock timing live in the `carta` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod clock;
pub mod geometry;
pub mod generator;
pub mod kinematics;
pub mod metrics;
pub mod optimizer;
pub mod paths;
pub mod planner;
pub mod search;

mod linalg;

pub use geometry::{Capsule, Cuboid, DistanceResult};
pub use generator::{CandidateSet, DlsTracker, GenerativeIk, Latent, LatentSampler, TargetPath};
pub use kinematics::{ChainError, Config, JointKind, JointSpec, KinematicChain, Pose};
pub use optimizer::{OptimizerParams, Trajectory, ValidityReport};
pub use clock::{Clock, FrozenClock, TickClock};
pub use planner::{plan, PlanError, PlanResult, PlannerParams, Problem};
pub use search::{SearchCost, SearchResult};
