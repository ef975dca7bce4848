//! Capsule distance queries and their configuration-space derivatives.
//!
//! Distances are signed surrogates: the separation between the capsule
//! axes (or axis and box) minus the radii. Overlapping shapes give a
//! negative value that keeps shrinking with deeper overlap until the axes
//! meet; it is not the true penetration depth.

pub mod qp;

use alloc::vec::Vec;

use nalgebra::{DMatrix, Isometry3, Matrix2, Matrix4, Point3, Vector2, Vector3, Vector4};
use num_traits::Float;

use crate::kinematics::{ChainError, ChainState, Config, KinematicChain};
use qp::BoxQp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Self { a, b, radius }
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> Self {
        Self {
            a: iso.transform_point(&Point3::from(self.a)).coords,
            b: iso.transform_point(&Point3::from(self.b)).coords,
            radius: self.radius,
        }
    }

    pub fn point_at(&self, t: f64) -> Vector3<f64> {
        self.a + (self.b - self.a) * t
    }
}

/// Oriented box given by its frame and the extents in that frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid {
    pub pose: Isometry3<f64>,
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Cuboid {
    pub fn new(pose: Isometry3<f64>, min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { pose, min, max }
    }

    /// World-aligned box spanning `min..max`.
    pub fn axis_aligned(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self::new(Isometry3::identity(), min, max)
    }

    /// Box centered on `pose` with the given half extents.
    pub fn centered(pose: Isometry3<f64>, half_extents: Vector3<f64>) -> Self {
        Self::new(pose, -half_extents, half_extents)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    pub distance: f64,
    /// Segment parameters: `(t1, t2)` for capsule pairs, `(t, 0)` for boxes.
    pub t: [f64; 2],
    /// Closest point on the (first) capsule axis, world frame.
    pub witness_a: Vector3<f64>,
    /// Closest point on the second axis or inside the box, world frame.
    pub witness_b: Vector3<f64>,
}

pub fn capsule_capsule_distance(c1: &Capsule, c2: &Capsule) -> DistanceResult {
    let qp = capsule_capsule_qp(c1, c2);
    let sol = qp.solve(&Vector2::new(0.5, 0.5));
    let (t1, t2) = (sol.x[0], sol.x[1]);
    let p1 = c1.point_at(t1);
    let p2 = c2.point_at(t2);
    DistanceResult {
        distance: (p1 - p2).norm() - (c1.radius + c2.radius),
        t: [t1, t2],
        witness_a: p1,
        witness_b: p2,
    }
}

/// The segment-segment problem over `(t1, t2)`.
pub fn capsule_capsule_qp(c1: &Capsule, c2: &Capsule) -> BoxQp<2> {
    let u = c1.b - c1.a;
    let v = c2.b - c2.a;
    let d0 = c1.a - c2.a;
    let uv = u.dot(&v);
    BoxQp {
        h: Matrix2::new(2.0 * u.dot(&u), -2.0 * uv, -2.0 * uv, 2.0 * v.dot(&v)),
        g: Vector2::new(2.0 * d0.dot(&u), -2.0 * d0.dot(&v)),
        lo: Vector2::zeros(),
        hi: Vector2::new(1.0, 1.0),
    }
}

/// The capsule-box problem in the box frame over `(t, p)`.
pub fn capsule_cuboid_qp(local: &Capsule, cub: &Cuboid) -> BoxQp<4> {
    let a = local.a;
    let u = local.b - local.a;
    let mut h = Matrix4::zeros();
    h[(0, 0)] = 2.0 * u.dot(&u);
    for k in 0..3 {
        h[(0, k + 1)] = -2.0 * u[k];
        h[(k + 1, 0)] = -2.0 * u[k];
        h[(k + 1, k + 1)] = 2.0;
    }
    BoxQp {
        h,
        g: Vector4::new(2.0 * a.dot(&u), -2.0 * a.x, -2.0 * a.y, -2.0 * a.z),
        lo: Vector4::new(0.0, cub.min.x, cub.min.y, cub.min.z),
        hi: Vector4::new(1.0, cub.max.x, cub.max.y, cub.max.z),
    }
}

pub fn capsule_cuboid_distance(c: &Capsule, cub: &Cuboid) -> DistanceResult {
    let inv = cub.pose.inverse();
    let local = c.transformed(&inv);
    let qp = capsule_cuboid_qp(&local, cub);
    let mid = local.point_at(0.5);
    let start = Vector4::new(0.5, mid.x, mid.y, mid.z);
    let sol = qp.solve(&start);
    let t = sol.x[0];
    let p_local = Vector3::new(sol.x[1], sol.x[2], sol.x[3]);
    let axis_local = local.point_at(t);
    DistanceResult {
        distance: (axis_local - p_local).norm() - c.radius,
        t: [t, 0.0],
        witness_a: c.point_at(t),
        witness_b: cub.pose.transform_point(&Point3::from(p_local)).coords,
    }
}

/// Self-collision distances at `q`, one per entry of
/// [`KinematicChain::self_collision_pairs`].
pub fn self_collision_distances(chain: &KinematicChain, q: &Config) -> Result<Vec<f64>, ChainError> {
    let state = chain.state(q)?;
    let world = chain.world_capsules(&state);
    Ok(chain
        .self_collision_pairs()
        .iter()
        .map(|&(i, j)| capsule_capsule_distance(&world[i], &world[j]).distance)
        .collect())
}

/// Capsule-obstacle distances at `q`, capsule-major.
pub fn env_collision_distances(
    chain: &KinematicChain,
    q: &Config,
    obstacles: &[Cuboid],
) -> Result<Vec<f64>, ChainError> {
    let state = chain.state(q)?;
    let world = chain.world_capsules(&state);
    Ok(world
        .iter()
        .flat_map(|c| obstacles.iter().map(move |o| capsule_cuboid_distance(c, o).distance))
        .collect())
}

/// Number of collision entries (self pairs followed by capsule-obstacle pairs).
pub fn collision_entry_count(chain: &KinematicChain, obstacles: &[Cuboid]) -> usize {
    chain.self_collision_pairs().len() + chain.capsules().len() * obstacles.len()
}

/// One collision entry with enough context to differentiate it.
#[derive(Debug, Clone, Copy)]
pub struct CollisionEntry {
    pub result: DistanceResult,
    pub link_a: usize,
    /// `None` for obstacles.
    pub link_b: Option<usize>,
}

/// All self and environment distances for a precomputed chain state.
pub fn collision_entries(chain: &KinematicChain, state: &ChainState, obstacles: &[Cuboid]) -> Vec<CollisionEntry> {
    let world = chain.world_capsules(state);
    let caps = chain.capsules();
    let mut out = Vec::with_capacity(collision_entry_count(chain, obstacles));
    for &(i, j) in chain.self_collision_pairs() {
        out.push(CollisionEntry {
            result: capsule_capsule_distance(&world[i], &world[j]),
            link_a: caps[i].link,
            link_b: Some(caps[j].link),
        });
    }
    for (i, c) in world.iter().enumerate() {
        for o in obstacles {
            out.push(CollisionEntry {
                result: capsule_cuboid_distance(c, o),
                link_a: caps[i].link,
                link_b: None,
            });
        }
    }
    out
}

/// Gradient of one collision entry with respect to the joint values.
///
/// The witness parameters are held at their optimal active set, so the
/// derivative reduces to the motion of the two witness points projected on
/// the separation direction. Coincident witnesses give a zero row.
pub fn entry_gradient(state: &ChainState, entry: &CollisionEntry, out: &mut [f64]) {
    let r = &entry.result;
    let diff = r.witness_a - r.witness_b;
    let norm = diff.norm();
    if !(norm > 1e-12) {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let n = diff / norm;
    for (k, slot) in out.iter_mut().enumerate() {
        let mut v = state.point_jacobian_column(k, entry.link_a, &r.witness_a);
        if let Some(lb) = entry.link_b {
            v -= state.point_jacobian_column(k, lb, &r.witness_b);
        }
        *slot = n.dot(&v);
    }
}

/// Rows of d(distance)/dq aligned with the self then environment distance vectors.
pub fn distance_jacobians(
    chain: &KinematicChain,
    q: &Config,
    obstacles: &[Cuboid],
) -> Result<DMatrix<f64>, ChainError> {
    let state = chain.state(q)?;
    let entries = collision_entries(chain, &state, obstacles);
    let d = chain.dof();
    let mut jac = DMatrix::zeros(entries.len(), d);
    let mut row = alloc::vec![0.0; d];
    for (r, e) in entries.iter().enumerate() {
        entry_gradient(&state, e, &mut row);
        for k in 0..d {
            jac[(r, k)] = row[k];
        }
    }
    Ok(jac)
}

/// True when any self pair or obstacle pair has non-positive distance.
///
/// Bounding spheres skip pairs that cannot touch.
pub fn in_collision(chain: &KinematicChain, state: &ChainState, obstacles: &[Cuboid]) -> bool {
    let world = chain.world_capsules(state);
    let spheres: Vec<(Vector3<f64>, f64)> = world
        .iter()
        .map(|c| ((c.a + c.b) * 0.5, (c.b - c.a).norm() * 0.5 + c.radius))
        .collect();
    for &(i, j) in chain.self_collision_pairs() {
        let (ci, ri) = spheres[i];
        let (cj, rj) = spheres[j];
        if (ci - cj).norm() > ri + rj {
            continue;
        }
        if capsule_capsule_distance(&world[i], &world[j]).distance <= 0.0 {
            return true;
        }
    }
    for o in obstacles {
        let half = (o.max - o.min) * 0.5;
        let center = o.pose.transform_point(&Point3::from((o.max + o.min) * 0.5)).coords;
        let box_radius = half.norm();
        for (i, c) in world.iter().enumerate() {
            let (cc, rc) = spheres[i];
            if (cc - center).norm() > rc + box_radius {
                continue;
            }
            if capsule_cuboid_distance(c, o).distance <= 0.0 {
                return true;
            }
        }
    }
    false
}

/// Smallest self and environment distances (`+inf` when there are none).
pub fn min_distances(chain: &KinematicChain, state: &ChainState, obstacles: &[Cuboid]) -> (f64, f64) {
    let entries = collision_entries(chain, state, obstacles);
    let n_self = chain.self_collision_pairs().len();
    let mut min_self = f64::infinity();
    let mut min_env = f64::infinity();
    for (i, e) in entries.iter().enumerate() {
        if i < n_self {
            min_self = min_self.min(e.result.distance);
        } else {
            min_env = min_env.min(e.result.distance);
        }
    }
    (min_self, min_env)
}
