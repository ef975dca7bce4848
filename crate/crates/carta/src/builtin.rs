//! Builtin chains and benchmark problems.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use carta_core::paths::{generate_path, PathShape, PathSpec};
use carta_core::{Cuboid, KinematicChain, Problem};
use nalgebra::{Isometry3, UnitQuaternion, Vector3};

use crate::chain_file::parse_chain;

pub const PANDA_TOML: &str = include_str!("../chains/panda.toml");
pub const FETCH_ARM_TOML: &str = include_str!("../chains/fetch_arm.toml");
pub const FETCH_FULL_TOML: &str = include_str!("../chains/fetch_full.toml");

pub fn panda() -> KinematicChain {
    parse_chain(PANDA_TOML).expect("builtin chain parses")
}

pub fn fetch_arm() -> KinematicChain {
    parse_chain(FETCH_ARM_TOML).expect("builtin chain parses")
}

pub fn fetch_full() -> KinematicChain {
    parse_chain(FETCH_FULL_TOML).expect("builtin chain parses")
}

pub fn builtin_chain(name: &str) -> Option<KinematicChain> {
    match name {
        "panda" => Some(panda()),
        "fetch_arm" => Some(fetch_arm()),
        "fetch_full" => Some(fetch_full()),
        _ => None,
    }
}

/// Waypoints per builtin path.
pub const DEFAULT_WAYPOINTS: usize = 100;

fn rpy(r: f64, p: f64, y: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(r, p, y)
}

fn cube(center: [f64; 3], half: [f64; 3]) -> Cuboid {
    Cuboid::centered(Isometry3::translation(center[0], center[1], center[2]), Vector3::from(half))
}

fn problem(name: &str, chain: KinematicChain, spec: PathSpec, obstacles: Vec<Cuboid>) -> Problem {
    Problem {
        name: name.to_string(),
        chain,
        path: generate_path(&spec).expect("builtin path is well formed"),
        obstacles,
    }
}

/// Panda tool pointing straight down.
fn panda_down() -> UnitQuaternion<f64> {
    rpy(PI, 0.0, 0.0)
}

/// Panda tool pointing along +x, tilted 30 degrees down.
fn panda_forward_down() -> UnitQuaternion<f64> {
    rpy(0.0, 2.0 * PI / 3.0, 0.0)
}

/// Panda tool path through the gap between the two corridor walls.
pub fn corridor_walls() -> Vec<Cuboid> {
    vec![
        Cuboid::axis_aligned(Vector3::new(0.50, -0.4, 0.0), Vector3::new(0.55, 0.4, 0.30)),
        Cuboid::axis_aligned(Vector3::new(0.50, -0.4, 0.55), Vector3::new(0.55, 0.4, 1.0)),
    ]
}

pub fn builtin_problems() -> Vec<Problem> {
    let n = DEFAULT_WAYPOINTS;
    let (x, y, z) = (Vector3::x(), Vector3::y(), Vector3::z());
    let fetch_front = UnitQuaternion::identity();
    vec![
        problem(
            "panda-circle",
            panda(),
            PathSpec::new(PathShape::Circle { radius: 0.15 }, Vector3::new(0.5, 0.0, 0.35), panda_down(), n).with_plane(x, y),
            vec![],
        ),
        problem(
            "panda-1cube",
            panda(),
            PathSpec::new(PathShape::Line { offset: Vector3::new(0.0, 0.5, 0.0) }, Vector3::new(0.45, -0.25, 0.3), panda_down(), n),
            vec![cube([0.45, 0.0, 0.1], [0.06, 0.06, 0.1])],
        ),
        problem(
            "panda-2cubes",
            panda(),
            PathSpec::new(PathShape::Line { offset: Vector3::new(0.0, 0.5, 0.0) }, Vector3::new(0.45, -0.25, 0.3), panda_down(), n),
            vec![cube([0.45, -0.1, 0.1], [0.05, 0.05, 0.1]), cube([0.45, 0.12, 0.1], [0.05, 0.05, 0.1])],
        ),
        problem(
            "panda-flappy-bird",
            panda(),
            PathSpec::new(PathShape::Line { offset: Vector3::new(0.22, 0.0, 0.0) }, Vector3::new(0.40, 0.0, 0.425), panda_forward_down(), n),
            corridor_walls(),
        ),
        problem(
            "fetch_arm-circle",
            fetch_arm(),
            PathSpec::new(PathShape::Circle { radius: 0.2 }, Vector3::new(0.85, 0.0, 0.8), fetch_front, n).with_plane(y, z),
            vec![],
        ),
        problem(
            "fetch_arm-hello",
            fetch_arm(),
            PathSpec::new(PathShape::Glyph { height: 0.07, loops: 2 }, Vector3::new(0.85, 0.0, 0.8), fetch_front, n).with_plane(y, z),
            vec![],
        ),
        problem(
            "fetch_arm-rotation",
            fetch_arm(),
            PathSpec::new(PathShape::Rotation { axis: z, angle: FRAC_PI_2 }, Vector3::new(0.85, 0.0, 0.8), rpy(0.0, 0.0, -FRAC_PI_4), n),
            vec![],
        ),
        problem(
            "fetch_arm-square",
            fetch_arm(),
            PathSpec::new(PathShape::Square { side: 0.3, corner_radius: 0.05 }, Vector3::new(0.85, 0.0, 0.8), fetch_front, n).with_plane(y, z),
            vec![],
        ),
        problem(
            "fetch_full-s",
            fetch_full(),
            PathSpec::new(PathShape::SCurve { radius: 0.075 }, Vector3::new(0.85, 0.0, 0.95), fetch_front, n).with_plane(y, z),
            vec![],
        ),
        problem(
            "fetch_full-square",
            fetch_full(),
            PathSpec::new(PathShape::Square { side: 0.3, corner_radius: 0.05 }, Vector3::new(0.85, 0.0, 1.0), fetch_front, n).with_plane(y, z),
            vec![],
        ),
    ]
}

pub fn builtin_problem(name: &str) -> Option<Problem> {
    builtin_problems().into_iter().find(|p| p.name == name)
}
