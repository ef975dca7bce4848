//! Test-only oracles and fixtures. Each oracle recomputes a quantity by a
//! route that shares no code with the library implementation.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use carta_core::kinematics::{JointKind, LinkCapsule};
use carta_core::{Capsule, Config, Cuboid, JointSpec, KinematicChain, PlannerParams, Problem, TargetPath};
use nalgebra::{DMatrix, DVector, Isometry3, Matrix3, Matrix4, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_config(chain: &KinematicChain, rng: &mut ChaCha8Rng) -> Config {
    Config::from_iterator(
        chain.dof(),
        (0..chain.dof()).map(|j| rng.random_range(chain.lower()[j]..=chain.upper()[j])),
    )
}

fn origin(xyz: [f64; 3], rpy: [f64; 3]) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(xyz[0], xyz[1], xyz[2]),
        UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
    )
}

fn capsule(link: usize, a: [f64; 3], b: [f64; 3], r: f64) -> LinkCapsule {
    LinkCapsule {
        link,
        capsule: Capsule::new(Vector3::from(a), Vector3::from(b), r),
    }
}

fn adjacent_pairs(caps: &[LinkCapsule], within: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..caps.len() {
        for b in a + 1..caps.len() {
            if caps[a].link.abs_diff(caps[b].link) <= within {
                out.push((a, b));
            }
        }
    }
    out
}

/// Three revolute joints about z with 0.5 m links along x.
pub fn planar3() -> KinematicChain {
    let z = Vector3::z();
    let joints = vec![
        JointSpec::revolute("j0", Isometry3::identity(), z, -2.5, 2.5),
        JointSpec::revolute("j1", Isometry3::translation(0.5, 0.0, 0.0), z, -2.5, 2.5),
        JointSpec::revolute("j2", Isometry3::translation(0.5, 0.0, 0.0), z, -2.5, 2.5),
        JointSpec::fixed("tool", Isometry3::translation(0.5, 0.0, 0.0)),
    ];
    let caps = vec![
        capsule(1, [0.05, 0.0, 0.0], [0.45, 0.0, 0.0], 0.04),
        capsule(2, [0.05, 0.0, 0.0], [0.45, 0.0, 0.0], 0.04),
        capsule(3, [0.05, 0.0, 0.0], [0.5, 0.0, 0.0], 0.04),
    ];
    let ignore = adjacent_pairs(&caps, 1);
    KinematicChain::new("planar3", joints, caps, ignore).unwrap()
}

fn arm7_joints() -> Vec<JointSpec> {
    let z = Vector3::z();
    let h = FRAC_PI_2;
    vec![
        JointSpec::revolute("a1", origin([0.0, 0.0, 0.333], [0.0; 3]), z, -2.8973, 2.8973),
        JointSpec::revolute("a2", origin([0.0; 3], [-h, 0.0, 0.0]), z, -1.7628, 1.7628),
        JointSpec::revolute("a3", origin([0.0, -0.316, 0.0], [h, 0.0, 0.0]), z, -2.8973, 2.8973),
        JointSpec::revolute("a4", origin([0.0825, 0.0, 0.0], [h, 0.0, 0.0]), z, -3.0718, -0.0698),
        JointSpec::revolute("a5", origin([-0.0825, 0.384, 0.0], [-h, 0.0, 0.0]), z, -2.8973, 2.8973),
        JointSpec::revolute("a6", origin([0.0; 3], [h, 0.0, 0.0]), z, -0.0175, 3.7525),
        JointSpec::revolute("a7", origin([0.088, 0.0, 0.0], [h, 0.0, 0.0]), z, -2.8973, 2.8973),
        JointSpec::fixed("tool", origin([0.0, 0.0, 0.21], [0.0, 0.0, -0.785])),
    ]
}

fn arm7_capsules(offset: usize) -> Vec<LinkCapsule> {
    vec![
        capsule(offset, [0.0, 0.0, 0.05], [0.0, 0.0, 0.2], 0.09),
        capsule(offset + 2, [0.0, 0.0, -0.05], [0.0, -0.3, 0.0], 0.07),
        capsule(offset + 4, [-0.08, 0.05, 0.0], [-0.08, 0.33, 0.0], 0.06),
        capsule(offset + 6, [0.0, 0.0, -0.05], [0.0, 0.0, 0.05], 0.07),
        capsule(offset + 8, [0.0, 0.0, -0.12], [0.0, 0.0, -0.03], 0.06),
    ]
}

/// Seven revolute joints with the frame layout of a common research arm.
pub fn arm7() -> KinematicChain {
    let caps = arm7_capsules(0);
    let ignore = adjacent_pairs(&caps, 2);
    KinematicChain::new("arm7", arm7_joints(), caps, ignore).unwrap()
}

/// `arm7` on a vertical slider: eight joints, the first prismatic.
pub fn slider8() -> KinematicChain {
    let mut joints = vec![JointSpec::prismatic("lift", Isometry3::identity(), Vector3::z(), 0.0, 0.4)];
    joints.extend(arm7_joints());
    let caps = arm7_capsules(1);
    let ignore = adjacent_pairs(&caps, 2);
    KinematicChain::new("slider8", joints, caps, ignore).unwrap()
}

// ---------------------------------------------------------------- kinematics

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation about a unit axis by the Rodrigues formula.
pub fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = skew(axis);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

fn homogeneous(r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

/// End-effector transform as a product of 4x4 matrices, one pair per joint.
pub fn fk_oracle(chain: &KinematicChain, q: &Config) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    let mut j = 0;
    for joint in chain.joints() {
        let o = joint.origin.rotation.to_rotation_matrix();
        t *= homogeneous(o.matrix(), &joint.origin.translation.vector);
        match joint.kind {
            JointKind::Revolute => {
                t *= homogeneous(&rodrigues(&joint.axis, q[j]), &Vector3::zeros());
                j += 1;
            }
            JointKind::Prismatic => {
                t *= homogeneous(&Matrix3::identity(), &(joint.axis * q[j]));
                j += 1;
            }
            JointKind::Fixed => {}
        }
    }
    t
}

fn position_and_rotation(m: &Matrix4<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    (m.fixed_view::<3, 1>(0, 3).into_owned(), m.fixed_view::<3, 3>(0, 0).into_owned())
}

/// Central differences of `fk_oracle`.
pub fn fd_jacobian(chain: &KinematicChain, q: &Config, h: f64) -> DMatrix<f64> {
    let d = chain.dof();
    let mut jac = DMatrix::zeros(6, d);
    for j in 0..d {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[j] += h;
        minus[j] -= h;
        let (p1, r1) = position_and_rotation(&fk_oracle(chain, &plus));
        let (p0, r0) = position_and_rotation(&fk_oracle(chain, &minus));
        let v = (p1 - p0) / (2.0 * h);
        // Skew part of the relative rotation is sin(angle) * axis; exact to
        // O(h^2) here, unlike an acos of the trace.
        let rel = r1 * r0.transpose();
        let w = Vector3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]) / (4.0 * h);
        for k in 0..3 {
            jac[(k, j)] = v[k];
            jac[(k + 3, j)] = w[k];
        }
    }
    jac
}

/// Central-difference Jacobian of a vector function.
pub fn fd_matrix(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut m = DMatrix::zeros(rows, x.len());
    for j in 0..x.len() {
        let mut a = x.clone();
        let mut b = x.clone();
        a[j] += h;
        b[j] -= h;
        let col = (f(&a) - f(&b)) / (2.0 * h);
        m.set_column(j, &col);
    }
    m
}

// ------------------------------------------------------------------ geometry

/// Grid search over a box followed by repeated zooming onto the best cell.
/// Only sound for convex objectives of one variable: there the grid
/// minimizer's neighbouring cells always bracket a true minimizer.
fn zoom_min(f: impl Fn(f64) -> f64, first: usize) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut cells = first;
    let mut best = f64::INFINITY;
    loop {
        let step = (hi - lo) / cells as f64;
        let mut arg = lo;
        for i in 0..=cells {
            let t = (lo + step * i as f64).min(hi);
            let v = f(t);
            if v < best {
                best = v;
                arg = t;
            }
        }
        if step < 1e-12 {
            return best;
        }
        (lo, hi) = ((arg - 2.0 * step).max(lo), (arg + 2.0 * step).min(hi));
        cells = 20;
    }
}

/// Capsule-capsule distance: search over the first segment parameter, with
/// the nearest point of the second segment found by clamped projection.
pub fn capsule_distance_oracle(c1: &Capsule, c2: &Capsule) -> f64 {
    let u = c2.b - c2.a;
    let uu = u.norm_squared();
    let d = zoom_min(
        |t| {
            let p = c1.a + (c1.b - c1.a) * t;
            let s = if uu > 0.0 { ((p - c2.a).dot(&u) / uu).clamp(0.0, 1.0) } else { 0.0 };
            (p - (c2.a + u * s)).norm()
        },
        2000,
    );
    d - c1.radius - c2.radius
}

/// Capsule-cuboid distance: search over the segment parameter, with the
/// nearest box point found by clamping in the box frame.
pub fn cuboid_distance_oracle(c: &Capsule, cub: &Cuboid) -> f64 {
    let inv = cub.pose.inverse();
    let a = inv.transform_point(&c.a.into()).coords;
    let b = inv.transform_point(&c.b.into()).coords;
    let d = zoom_min(
        |t| {
            let x = a + (b - a) * t;
            let p = Vector3::from_fn(|k, _| x[k].clamp(cub.min[k], cub.max[k]));
            (x - p).norm()
        },
        2000,
    );
    d - c.radius
}

pub fn random_capsule(rng: &mut ChaCha8Rng) -> Capsule {
    let mut v = || Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let a = v();
    let b = v();
    let r = rng.random_range(0.01..0.2);
    Capsule::new(a, b, r)
}

/// Random capsule pairs, including parallel, coincident, point and crossing
/// configurations.
pub fn random_capsule_pair(rng: &mut ChaCha8Rng) -> (Capsule, Capsule) {
    let c1 = random_capsule(rng);
    let mut c2 = random_capsule(rng);
    match rng.random_range(0..6) {
        0 => {
            let shift = Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            c2.a = c1.a + shift;
            c2.b = c1.b + shift;
        }
        1 => c2.b = c2.a,
        2 => {
            let mid = c1.point_at(rng.random_range(0.0..1.0));
            c2.a = mid - (c2.b - c2.a) * 0.5;
            c2.b = mid + (c2.b - c2.a) * 0.5;
        }
        3 => c2 = Capsule::new(c1.a, c1.b, c2.radius),
        _ => {}
    }
    (c1, c2)
}

pub fn random_cuboid(rng: &mut ChaCha8Rng) -> Cuboid {
    let rot = UnitQuaternion::from_euler_angles(
        rng.random_range(-3.0..3.0),
        rng.random_range(-1.5..1.5),
        rng.random_range(-3.0..3.0),
    );
    let t = Translation3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let half = Vector3::new(rng.random_range(0.02..0.5), rng.random_range(0.02..0.5), rng.random_range(0.02..0.5));
    Cuboid::centered(Isometry3::from_parts(t, rot), half)
}

// -------------------------------------------------------------------- search

/// Exhaustive minimum over all `K^n` plan interleavings of the lexicographic
/// (summed node penalty, worst normalized step) cost.
pub fn brute_force_search(plans: &[Vec<Config>], penalties: &[Vec<f64>], scales: &[f64]) -> (f64, f64) {
    let k = plans.len();
    let n = plans[0].len();
    let mut best = (f64::INFINITY, f64::INFINITY);
    let mut idx = vec![0usize; n];
    loop {
        let cost = path_cost(plans, penalties, scales, &idx);
        if cost.0 < best.0 || (cost.0 == best.0 && cost.1 < best.1) {
            best = cost;
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

pub fn path_cost(plans: &[Vec<Config>], penalties: &[Vec<f64>], scales: &[f64], idx: &[usize]) -> (f64, f64) {
    let penalty: f64 = idx.iter().enumerate().map(|(i, &p)| penalties[p][i]).sum();
    let mut worst: f64 = 0.0;
    for i in 0..idx.len() - 1 {
        let a = &plans[idx[i]][i];
        let b = &plans[idx[i + 1]][i + 1];
        for j in 0..a.len() {
            worst = worst.max((a[j] - b[j]).abs() / scales[j]);
        }
    }
    (penalty, worst)
}

pub struct DpInstance {
    pub chain: KinematicChain,
    pub obstacles: Vec<Cuboid>,
    pub plans: Vec<Vec<Config>>,
}

/// Small search instances on a planar or a mixed chain. Joint values sit on
/// a 1 degree (1 cm) lattice so equal-cost ties occur, and a share of them is
/// pushed into the limit margin or into the obstacle.
pub fn random_dp_instance(rng: &mut ChaCha8Rng, max_k: usize, max_n: usize) -> DpInstance {
    let mixed = rng.random_bool(0.3);
    let chain = if mixed { slider8() } else { planar3() };
    let obstacles = if mixed {
        vec![Cuboid::axis_aligned(Vector3::new(0.3, -0.2, 0.0), Vector3::new(0.5, 0.2, 0.3))]
    } else {
        vec![Cuboid::axis_aligned(Vector3::new(0.8, 0.2, -0.1), Vector3::new(1.0, 0.5, 0.1))]
    };
    let k = rng.random_range(1..=max_k);
    let n = rng.random_range(2..=max_n);
    let d = chain.dof();
    let base = random_config(&chain, rng);
    let deg = 1f64.to_radians();
    let plans = (0..k)
        .map(|_| {
            (0..n)
                .map(|_| {
                    Config::from_iterator(
                        d,
                        (0..d).map(|j| {
                            let (lo, hi) = (chain.lower()[j], chain.upper()[j]);
                            let prismatic = chain.kinds()[j] == JointKind::Prismatic;
                            let unit = if prismatic { 0.01 } else { deg };
                            let v = match rng.random_range(0..10) {
                                0 => lo + unit * rng.random_range(0..3) as f64,
                                1 => base[j] + unit * rng.random_range(-40..=40) as f64,
                                _ => base[j] + unit * rng.random_range(-8..=8) as f64,
                            };
                            v.clamp(lo, hi)
                        }),
                    )
                })
                .collect()
        })
        .collect();
    DpInstance { chain, obstacles, plans }
}

/// Node penalties recomputed from the margin and weight constants.
pub fn oracle_penalties(inst: &DpInstance) -> Vec<Vec<f64>> {
    let chain = &inst.chain;
    inst.plans
        .iter()
        .map(|plan| {
            plan.iter()
                .map(|q| {
                    let near = (0..chain.dof()).any(|j| {
                        let margin = match chain.kinds()[j] {
                            JointKind::Prismatic => 0.03,
                            _ => 1.5f64.to_radians(),
                        };
                        q[j] - chain.lower()[j] < margin || chain.upper()[j] - q[j] < margin
                    });
                    let state = chain.state(q).unwrap();
                    let hit = carta_core::geometry::in_collision(chain, &state, &inst.obstacles);
                    (if near { 10.0 } else { 0.0 }) + (if hit { 100.0 } else { 0.0 })
                })
                .collect()
        })
        .collect()
}

pub fn oracle_scales(chain: &KinematicChain) -> Vec<f64> {
    chain
        .kinds()
        .iter()
        .map(|k| if *k == JointKind::Prismatic { 0.02 } else { 7f64.to_radians() })
        .collect()
}

// ------------------------------------------------------------------ problems

/// Joint-space curve `q(s)` sampled at `n` points, `s` in [0, 1].
pub fn joint_curve(n: usize, f: impl Fn(f64) -> Vec<f64>) -> Vec<Config> {
    (0..n)
        .map(|i| Config::from_vec(f(i as f64 / (n - 1) as f64)))
        .collect()
}

/// A problem whose targets are the poses of a known smooth, valid trajectory.
pub fn traced_problem(name: &str, chain: KinematicChain, reference: &[Config], obstacles: Vec<Cuboid>) -> Problem {
    let poses = chain.fk_batch(reference).unwrap();
    Problem {
        name: name.into(),
        chain,
        path: TargetPath::new(poses).unwrap(),
        obstacles,
    }
}

pub fn planar_arc(n: usize) -> Vec<Config> {
    joint_curve(n, |s| vec![0.3 + 0.6 * s, 0.9 - 0.5 * s, -0.6 + 0.4 * (std::f64::consts::PI * s).sin()])
}

pub fn arm7_sweep(n: usize) -> Vec<Config> {
    joint_curve(n, |s| {
        let w = std::f64::consts::TAU * s;
        vec![
            0.4 * w.sin(),
            -0.3 + 0.2 * (1.0 - w.cos()),
            0.2 * w.sin(),
            -2.0 + 0.3 * w.sin(),
            0.1,
            1.8 + 0.2 * (1.0 - w.cos()),
            0.7,
        ]
    })
}

/// Three small problems: an open planar arc, the same arc beside a box,
/// and a closed sweep of the 7-joint arm.
pub fn toy_problems() -> Vec<Problem> {
    let planar_box = Cuboid::axis_aligned(Vector3::new(0.2, -0.9, -0.2), Vector3::new(0.6, -0.5, 0.2));
    vec![
        traced_problem("planar-arc", planar3(), &planar_arc(40), vec![]),
        traced_problem("planar-arc-box", planar3(), &planar_arc(40), vec![planar_box]),
        traced_problem("arm7-sweep", arm7(), &arm7_sweep(40), vec![]),
    ]
}

pub fn toy_params(seed: u64) -> PlannerParams {
    PlannerParams {
        k: 24,
        seed,
        densification_increment: 12,
        budget_s: 60.0,
        ..PlannerParams::default()
    }
}
