mod common;

use carta_core::geometry::{
    capsule_capsule_distance, capsule_capsule_qp, capsule_cuboid_distance, capsule_cuboid_qp, in_collision,
    min_distances,
};
use carta_core::{Capsule, Config, Cuboid};
use common::{capsule_distance_oracle, cuboid_distance_oracle, planar3, random_capsule, random_capsule_pair, random_cuboid, rng};
use nalgebra::{Vector2, Vector3, Vector4};
use proptest::prelude::*;

#[test]
fn capsule_pairs_match_the_grid_oracle() {
    let mut r = rng(10);
    for _ in 0..200 {
        let (c1, c2) = random_capsule_pair(&mut r);
        let got = capsule_capsule_distance(&c1, &c2);
        let want = capsule_distance_oracle(&c1, &c2);
        assert!((got.distance - want).abs() < 1e-5, "{c1:?} {c2:?}: {} vs {want}", got.distance);
        let qp = capsule_capsule_qp(&c1, &c2);
        assert!(qp.kkt_violation(&Vector2::from(got.t)) <= 1e-8);
    }
}

#[test]
fn capsule_cuboid_pairs_match_the_grid_oracle() {
    let mut r = rng(11);
    for _ in 0..100 {
        let c = random_capsule(&mut r);
        let cub = random_cuboid(&mut r);
        let got = capsule_cuboid_distance(&c, &cub);
        let want = cuboid_distance_oracle(&c, &cub);
        assert!((got.distance - want).abs() < 1e-4, "{c:?} {cub:?}: {} vs {want}", got.distance);
        let local = c.transformed(&cub.pose.inverse());
        let qp = capsule_cuboid_qp(&local, &cub);
        let sol = qp.solve(&Vector4::new(0.0, cub.min.x, cub.min.y, cub.min.z));
        assert!(qp.kkt_violation(&sol.x) <= 1e-8);
        let axis = local.point_at(sol.x[0]);
        let gap = (axis - Vector3::new(sol.x[1], sol.x[2], sol.x[3])).norm() - c.radius;
        assert!((gap - want).abs() < 1e-4);
    }
}

#[test]
fn witnesses_realize_the_distance() {
    let mut r = rng(12);
    for _ in 0..100 {
        let (c1, c2) = random_capsule_pair(&mut r);
        let d = capsule_capsule_distance(&c1, &c2);
        let gap = (d.witness_a - d.witness_b).norm() - c1.radius - c2.radius;
        assert!((gap - d.distance).abs() < 1e-12);
    }
}

#[test]
fn touching_and_separated_capsules() {
    let x = Vector3::x();
    let c1 = Capsule::new(Vector3::zeros(), x, 0.1);
    let c2 = Capsule::new(Vector3::new(0.0, 0.2, 0.0), Vector3::new(1.0, 0.2, 0.0), 0.1);
    assert!(capsule_capsule_distance(&c1, &c2).distance.abs() < 1e-15);
    let c3 = Capsule::new(Vector3::new(2.0, 0.0, 0.0), Vector3::new(3.0, 0.0, 0.0), 0.25);
    assert!((capsule_capsule_distance(&c1, &c3).distance - 0.65).abs() < 1e-15);
    let cub = Cuboid::axis_aligned(Vector3::new(0.5, -1.0, 0.5), Vector3::new(1.5, 1.0, 1.0));
    assert!((capsule_cuboid_distance(&c1, &cub).distance - 0.4).abs() < 1e-12);
}

#[test]
fn folded_planar_arm_self_collides() {
    let chain = planar3();
    let open = chain.state(&Config::from_vec(vec![0.0, 0.3, 0.3])).unwrap();
    assert!(!in_collision(&chain, &open, &[]));
    let folded = chain.state(&Config::from_vec(vec![0.0, 2.5, 2.5])).unwrap();
    assert!(in_collision(&chain, &folded, &[]));
    assert!(min_distances(&chain, &folded, &[]).0 <= 0.0);
    let wall = Cuboid::axis_aligned(Vector3::new(0.7, -0.1, -0.1), Vector3::new(0.8, 0.1, 0.1));
    assert!(in_collision(&chain, &open, &[wall]));
    assert!(min_distances(&chain, &open, &[wall]).1 <= 0.0);
}

proptest! {
    #[test]
    fn distance_is_symmetric_and_rigid(seed in 0u64..10_000, yaw in -3.0f64..3.0, shift in -1.0f64..1.0) {
        let mut r = rng(seed);
        let (c1, c2) = random_capsule_pair(&mut r);
        let d12 = capsule_capsule_distance(&c1, &c2).distance;
        let d21 = capsule_capsule_distance(&c2, &c1).distance;
        prop_assert!((d12 - d21).abs() < 1e-12);
        let iso = nalgebra::Isometry3::new(Vector3::new(shift, -shift, 0.5), Vector3::new(0.0, 0.0, yaw));
        let moved = capsule_capsule_distance(&c1.transformed(&iso), &c2.transformed(&iso)).distance;
        prop_assert!((moved - d12).abs() < 1e-9);
    }
}
