//! Serial-chain forward kinematics and geometric Jacobians.
//!
//! Links are numbered from the base: link `0` is the fixed base frame and
//! link `j + 1` is the child of joint `j`. The end effector is the frame of
//! the last link, so trailing fixed joints act as tool offsets.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DVector, Isometry3, Matrix6xX, Translation3, Unit, UnitQuaternion, Vector3};
use num_traits::Float;
use thiserror::Error;

use crate::geometry::Capsule;

/// Joint configuration, one entry per actuated joint (radians or meters).
pub type Config = DVector<f64>;

const UNIT_AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("joint `{0}` axis is not unit length")]
    AxisNotUnit(String),
    #[error("joint `{0}` has lower limit above upper limit")]
    InvalidLimits(String),
    #[error("joint `{0}` is actuated but has no limits")]
    MissingLimits(String),
    #[error("fixed joint `{0}` must not carry limits")]
    FixedWithLimits(String),
    #[error("capsule {capsule} references link {link} but the chain has {links} links")]
    CapsuleLink {
        capsule: usize,
        link: usize,
        links: usize,
    },
    #[error("ignore pair ({0}, {1}) references a missing capsule")]
    IgnorePair(usize, usize),
    #[error("capsule {0} has a non-positive radius")]
    CapsuleRadius(usize),
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("configuration contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    /// Motion axis in the joint frame (after `origin`).
    pub axis: Vector3<f64>,
    /// Transform from the parent link frame to the joint frame.
    pub origin: Isometry3<f64>,
    pub limits: Option<(f64, f64)>,
}

impl JointSpec {
    pub fn revolute(
        name: impl Into<String>,
        origin: Isometry3<f64>,
        axis: Vector3<f64>,
        lower: f64,
        upper: f64,
    ) -> Self {
        Self {
            name: name.into(),
            kind: JointKind::Revolute,
            axis,
            origin,
            limits: Some((lower, upper)),
        }
    }

    pub fn prismatic(
        name: impl Into<String>,
        origin: Isometry3<f64>,
        axis: Vector3<f64>,
        lower: f64,
        upper: f64,
    ) -> Self {
        Self {
            name: name.into(),
            kind: JointKind::Prismatic,
            axis,
            origin,
            limits: Some((lower, upper)),
        }
    }

    pub fn fixed(name: impl Into<String>, origin: Isometry3<f64>) -> Self {
        Self {
            name: name.into(),
            kind: JointKind::Fixed,
            axis: Vector3::z(),
            origin,
            limits: None,
        }
    }

    fn motion(&self, value: f64) -> Isometry3<f64> {
        match self.kind {
            JointKind::Revolute => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&Unit::new_unchecked(self.axis), value),
            ),
            JointKind::Prismatic => Isometry3::from_parts(
                Translation3::from(self.axis * value),
                UnitQuaternion::identity(),
            ),
            JointKind::Fixed => Isometry3::identity(),
        }
    }
}

/// A collision capsule rigidly attached to a link, expressed in that link's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCapsule {
    pub link: usize,
    pub capsule: Capsule,
}

/// An SE(3) pose with a unit-quaternion orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    /// Builds a pose from a position and roll/pitch/yaw, with the rotation
    /// composed as `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Vector3::from(xyz),
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        )
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    /// Roll, pitch and yaw in radians.
    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.orientation.euler_angles();
        [r, p, y]
    }
}

/// Position error (meters) and geodesic rotation error (radians, in `[0, pi]`).
pub fn pose_error(p: &Pose, y: &Pose) -> (f64, f64) {
    let pos = (p.position - y.position).norm();
    let rel = p.orientation.inverse() * y.orientation;
    let q = rel.quaternion();
    let rot = 2.0 * Float::atan2(q.imag().norm(), Float::abs(q.w));
    (pos, rot)
}

/// World-frame data for one actuated joint at a given configuration.
#[derive(Debug, Clone, Copy)]
pub struct JointAxis {
    pub kind: JointKind,
    pub point: Vector3<f64>,
    pub direction: Vector3<f64>,
    /// Index of the first link moved by this joint.
    pub child_link: usize,
}

/// Every link frame plus the world axes of the actuated joints.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub links: Vec<Isometry3<f64>>,
    pub axes: Vec<JointAxis>,
}

impl ChainState {
    pub fn end_effector(&self) -> Pose {
        Pose::from_isometry(self.links.last().expect("chain has a base link"))
    }

    /// Linear velocity of a world point attached to `link`, per unit joint velocity.
    pub fn point_jacobian_column(&self, dof: usize, link: usize, point: &Vector3<f64>) -> Vector3<f64> {
        let axis = &self.axes[dof];
        if axis.child_link > link {
            return Vector3::zeros();
        }
        match axis.kind {
            JointKind::Revolute => axis.direction.cross(&(point - axis.point)),
            JointKind::Prismatic => axis.direction,
            JointKind::Fixed => Vector3::zeros(),
        }
    }

    /// 6 x d geometric Jacobian of the end-effector frame.
    pub fn jacobian(&self) -> Matrix6xX<f64> {
        let ee_link = self.links.len() - 1;
        let ee = self.links[ee_link].translation.vector;
        let mut jac = Matrix6xX::zeros(self.axes.len());
        for (j, axis) in self.axes.iter().enumerate() {
            let v = self.point_jacobian_column(j, ee_link, &ee);
            let w = match axis.kind {
                JointKind::Revolute => axis.direction,
                _ => Vector3::zeros(),
            };
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&v);
            jac.fixed_view_mut::<3, 1>(3, j).copy_from(&w);
        }
        jac
    }
}

#[derive(Debug, Clone)]
pub struct KinematicChain {
    name: String,
    joints: Vec<JointSpec>,
    capsules: Vec<LinkCapsule>,
    ignore_pairs: BTreeSet<(usize, usize)>,
    actuated: Vec<usize>,
    kinds: Vec<JointKind>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    self_pairs: Vec<(usize, usize)>,
}

impl KinematicChain {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<JointSpec>,
        capsules: Vec<LinkCapsule>,
        ignore_pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ChainError> {
        let mut actuated = Vec::new();
        let mut kinds = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (i, joint) in joints.iter().enumerate() {
            if Float::abs(joint.axis.norm() - 1.0) > UNIT_AXIS_TOL {
                return Err(ChainError::AxisNotUnit(joint.name.clone()));
            }
            match (joint.kind, joint.limits) {
                (JointKind::Fixed, Some(_)) => {
                    return Err(ChainError::FixedWithLimits(joint.name.clone()))
                }
                (JointKind::Fixed, None) => {}
                (_, None) => return Err(ChainError::MissingLimits(joint.name.clone())),
                (kind, Some((lo, hi))) => {
                    if !(lo <= hi) {
                        return Err(ChainError::InvalidLimits(joint.name.clone()));
                    }
                    actuated.push(i);
                    kinds.push(kind);
                    lower.push(lo);
                    upper.push(hi);
                }
            }
        }
        let links = joints.len() + 1;
        for (i, c) in capsules.iter().enumerate() {
            if c.link >= links {
                return Err(ChainError::CapsuleLink {
                    capsule: i,
                    link: c.link,
                    links,
                });
            }
            if !(c.capsule.radius > 0.0) {
                return Err(ChainError::CapsuleRadius(i));
            }
        }
        let mut ignored = BTreeSet::new();
        for (a, b) in ignore_pairs {
            if a >= capsules.len() || b >= capsules.len() {
                return Err(ChainError::IgnorePair(a, b));
            }
            ignored.insert((a.min(b), a.max(b)));
        }
        let mut self_pairs = Vec::new();
        for a in 0..capsules.len() {
            for b in a + 1..capsules.len() {
                if !ignored.contains(&(a, b)) {
                    self_pairs.push((a, b));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            joints,
            capsules,
            ignore_pairs: ignored,
            actuated,
            kinds,
            lower,
            upper,
            self_pairs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    /// Number of actuated joints.
    pub fn dof(&self) -> usize {
        self.actuated.len()
    }

    pub fn num_links(&self) -> usize {
        self.joints.len() + 1
    }

    /// Kind of each actuated joint, in configuration order.
    pub fn kinds(&self) -> &[JointKind] {
        &self.kinds
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn capsules(&self) -> &[LinkCapsule] {
        &self.capsules
    }

    pub fn ignore_pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.ignore_pairs
    }

    /// Capsule index pairs checked for self collision.
    pub fn self_collision_pairs(&self) -> &[(usize, usize)] {
        &self.self_pairs
    }

    pub fn check_config(&self, q: &Config) -> Result<(), ChainError> {
        if q.len() != self.dof() {
            return Err(ChainError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(ChainError::NonFinite);
        }
        Ok(())
    }

    /// Link frames and world joint axes at `q`.
    pub fn state(&self, q: &Config) -> Result<ChainState, ChainError> {
        self.check_config(q)?;
        Ok(self.state_unchecked(q))
    }

    pub(crate) fn state_unchecked(&self, q: &Config) -> ChainState {
        let mut links = Vec::with_capacity(self.num_links());
        let mut axes = Vec::with_capacity(self.dof());
        let mut frame = Isometry3::identity();
        links.push(frame);
        let mut dof = 0;
        for (i, joint) in self.joints.iter().enumerate() {
            let joint_frame = frame * joint.origin;
            let value = if joint.kind == JointKind::Fixed {
                0.0
            } else {
                let v = q[dof];
                axes.push(JointAxis {
                    kind: joint.kind,
                    point: joint_frame.translation.vector,
                    direction: joint_frame.rotation * joint.axis,
                    child_link: i + 1,
                });
                dof += 1;
                v
            };
            frame = joint_frame * joint.motion(value);
            links.push(frame);
        }
        ChainState { links, axes }
    }

    pub fn fk(&self, q: &Config) -> Result<Pose, ChainError> {
        Ok(self.state(q)?.end_effector())
    }

    pub fn fk_batch(&self, configs: &[Config]) -> Result<Vec<Pose>, ChainError> {
        configs.iter().map(|q| self.fk(q)).collect()
    }

    /// Geometric Jacobian of the end effector; rows are (v, omega).
    pub fn jacobian(&self, q: &Config) -> Result<Matrix6xX<f64>, ChainError> {
        Ok(self.state(q)?.jacobian())
    }

    pub fn clamp_to_limits(&self, q: &Config) -> Config {
        let mut out = q.clone();
        self.clamp_in_place(&mut out);
        out
    }

    pub(crate) fn clamp_in_place(&self, q: &mut Config) {
        for (j, v) in q.iter_mut().enumerate() {
            *v = v.max(self.lower[j]).min(self.upper[j]);
        }
    }

    pub fn within_limits(&self, q: &Config) -> bool {
        q.iter()
            .enumerate()
            .all(|(j, v)| *v >= self.lower[j] && *v <= self.upper[j])
    }

    /// Capsules placed in the world frame for the given link frames.
    pub fn world_capsules(&self, state: &ChainState) -> Vec<Capsule> {
        self.capsules
            .iter()
            .map(|c| c.capsule.transformed(&state.links[c.link]))
            .collect()
    }
}
