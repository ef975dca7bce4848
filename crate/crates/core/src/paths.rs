//! Parametric end-effector paths.
//!
//! Planar shapes are drawn in the plane spanned by `plane[0]` and `plane[1]`
//! through `center`, and are sampled uniformly by arc length. Closed shapes
//! (circle, square) do not repeat their start point.

use alloc::vec::Vec;

use nalgebra::{Unit, UnitQuaternion, Vector2, Vector3};
use num_traits::Float;
use thiserror::Error;

use crate::generator::TargetPath;
use crate::kinematics::Pose;

use core::f64::consts::{FRAC_PI_2, PI, TAU};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("a path needs at least two waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("invalid path parameter: {0}")]
    Parameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathShape {
    Circle { radius: f64 },
    /// Square of side `side` with corners rounded to `corner_radius`.
    Square { side: f64, corner_radius: f64 },
    /// Two stacked three-quarter arcs of radius `radius`.
    SCurve { radius: f64 },
    /// Looped cursive stroke, `loops` loops of height `height`.
    Glyph { height: f64, loops: usize },
    /// Fixed position; orientation turns by `angle` about `axis` (world frame).
    Rotation { axis: Vector3<f64>, angle: f64 },
    /// Straight segment from `center` to `center + offset`.
    Line { offset: Vector3<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrientationProfile {
    Fixed,
    /// Yaw about the plane normal follows the direction of travel.
    Tangent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub shape: PathShape,
    pub center: Vector3<f64>,
    /// Orthonormal in-plane axes.
    pub plane: [Vector3<f64>; 2],
    pub orientation: UnitQuaternion<f64>,
    pub profile: OrientationProfile,
    pub n: usize,
}

impl PathSpec {
    pub fn new(shape: PathShape, center: Vector3<f64>, orientation: UnitQuaternion<f64>, n: usize) -> Self {
        Self {
            shape,
            center,
            plane: [Vector3::y(), Vector3::z()],
            orientation,
            profile: OrientationProfile::Fixed,
            n,
        }
    }

    pub fn with_plane(mut self, u: Vector3<f64>, v: Vector3<f64>) -> Self {
        self.plane = [u, v];
        self
    }

    pub fn with_profile(mut self, profile: OrientationProfile) -> Self {
        self.profile = profile;
        self
    }
}

fn positive(x: f64, what: &'static str) -> Result<f64, PathError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(PathError::Parameter(what))
    }
}

/// Point and unit tangent of a planar shape at arc length `s`.
type Planar = (Vector2<f64>, Vector2<f64>);

fn arc(center: Vector2<f64>, r: f64, a0: f64, dir: f64, s: f64) -> Planar {
    let a = a0 + dir * s / r;
    let (sa, ca) = a.sin_cos();
    (center + Vector2::new(ca, sa) * r, Vector2::new(-sa, ca) * dir)
}

fn rounded_square(side: f64, r: f64, mut s: f64) -> Planar {
    let h = side / 2.0;
    let straight = side - 2.0 * r;
    let quarter = FRAC_PI_2 * r;
    // Starts at the middle of the bottom edge, counterclockwise.
    let first = straight / 2.0;
    if s < first {
        return (Vector2::new(s, -h), Vector2::x());
    }
    s -= first;
    let corners = [
        (Vector2::new(h - r, -h + r), -FRAC_PI_2),
        (Vector2::new(h - r, h - r), 0.0),
        (Vector2::new(-h + r, h - r), FRAC_PI_2),
        (Vector2::new(-h + r, -h + r), PI),
    ];
    for (k, (c, a0)) in corners.iter().enumerate() {
        if s < quarter {
            return arc(*c, r, *a0, 1.0, s);
        }
        s -= quarter;
        let len = if k == 3 { first } else { straight };
        if s < len || k == 3 {
            let (p, t) = arc(*c, r, *a0, 1.0, quarter);
            return (p + t * s, t);
        }
        s -= len;
    }
    unreachable!()
}

fn s_curve(r: f64, s: f64) -> Planar {
    let leg = 1.5 * PI * r;
    if s <= leg {
        arc(Vector2::new(0.0, r), r, 0.0, 1.0, s)
    } else {
        arc(Vector2::new(0.0, -r), r, FRAC_PI_2, -1.0, s - leg)
    }
}

fn glyph(height: f64, t: f64) -> Vector2<f64> {
    // Prolate cycloid: one loop per 2*pi of t.
    let a = 0.35 * height;
    let b = 0.5 * height;
    Vector2::new(a * t - b * t.sin(), b * (1.0 - t.cos()))
}

/// Resamples a dense polyline uniformly by arc length.
fn resample(points: &[Vector2<f64>], n: usize) -> Vec<Planar> {
    let mut cumulative = Vec::with_capacity(points.len());
    let mut total = 0.0;
    cumulative.push(0.0);
    for w in points.windows(2) {
        total += (w[1] - w[0]).norm();
        cumulative.push(total);
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let s = total * k as f64 / (n - 1) as f64;
        while seg + 2 < points.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let f = if len > 0.0 { ((s - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let d = points[seg + 1] - points[seg];
        let t = if len > 0.0 { d / len } else { Vector2::x() };
        out.push((points[seg] + d * f, t));
    }
    out
}

pub fn generate_path(spec: &PathSpec) -> Result<TargetPath, PathError> {
    let n = spec.n;
    if n < 2 {
        return Err(PathError::TooFewWaypoints(n));
    }
    let [u, v] = spec.plane;
    if !(spec.center.iter().all(|x| x.is_finite())
        && (u.norm() - 1.0).abs() < 1e-9
        && (v.norm() - 1.0).abs() < 1e-9
        && u.dot(&v).abs() < 1e-9)
    {
        return Err(PathError::Parameter("plane axes must be orthonormal and the center finite"));
    }
    let normal = Unit::new_normalize(u.cross(&v));
    let lift = |p: Vector2<f64>| spec.center + u * p.x + v * p.y;

    let planar: Option<Vec<Planar>> = match spec.shape {
        PathShape::Circle { radius } => {
            let r = positive(radius, "radius")?;
            Some(
                (0..n)
                    .map(|k| {
                        let a = TAU * k as f64 / n as f64;
                        let (sa, ca) = a.sin_cos();
                        (Vector2::new(ca, sa) * r, Vector2::new(-sa, ca))
                    })
                    .collect(),
            )
        }
        PathShape::Square { side, corner_radius } => {
            let side = positive(side, "side")?;
            if !(corner_radius > 0.0 && corner_radius < side / 2.0) {
                return Err(PathError::Parameter("corner radius must be in (0, side/2)"));
            }
            let perimeter = 4.0 * (side - 2.0 * corner_radius) + TAU * corner_radius;
            Some(
                (0..n)
                    .map(|k| rounded_square(side, corner_radius, perimeter * k as f64 / n as f64))
                    .collect(),
            )
        }
        PathShape::SCurve { radius } => {
            let r = positive(radius, "radius")?;
            let total = 3.0 * PI * r;
            Some(
                (0..n)
                    .map(|k| s_curve(r, total * k as f64 / (n - 1) as f64))
                    .collect(),
            )
        }
        PathShape::Glyph { height, loops } => {
            let h = positive(height, "height")?;
            if loops == 0 {
                return Err(PathError::Parameter("glyph needs at least one loop"));
            }
            let dense = 64 * n * loops;
            let end = TAU * loops as f64 + PI;
            let points: Vec<Vector2<f64>> = (0..=dense)
                .map(|i| glyph(h, end * i as f64 / dense as f64) - glyph(h, end / 2.0))
                .collect();
            Some(resample(&points, n))
        }
        PathShape::Rotation { .. } | PathShape::Line { .. } => None,
    };

    let poses: Vec<Pose> = match (planar, spec.shape) {
        (Some(samples), _) => {
            let heading0 = Float::atan2(samples[0].1.y, samples[0].1.x);
            let mut prev = heading0;
            let mut unwrapped = 0.0;
            samples
                .iter()
                .map(|(p, t)| {
                    let orientation = match spec.profile {
                        OrientationProfile::Fixed => spec.orientation,
                        OrientationProfile::Tangent => {
                            let h = Float::atan2(t.y, t.x);
                            unwrapped += crate::linalg::wrap_angle(h - prev);
                            prev = h;
                            UnitQuaternion::from_axis_angle(&normal, unwrapped) * spec.orientation
                        }
                    };
                    Pose::new(lift(*p), orientation)
                })
                .collect()
        }
        (None, PathShape::Rotation { axis, angle }) => {
            if !(axis.norm() > 1e-12 && angle.is_finite()) {
                return Err(PathError::Parameter("rotation axis must be nonzero and angle finite"));
            }
            let axis = Unit::new_normalize(axis);
            (0..n)
                .map(|k| {
                    let a = angle * k as f64 / (n - 1) as f64;
                    Pose::new(spec.center, UnitQuaternion::from_axis_angle(&axis, a) * spec.orientation)
                })
                .collect()
        }
        (None, PathShape::Line { offset }) => {
            if !offset.iter().all(|x| x.is_finite()) {
                return Err(PathError::Parameter("line offset must be finite"));
            }
            (0..n)
                .map(|k| Pose::new(spec.center + offset * (k as f64 / (n - 1) as f64), spec.orientation))
                .collect()
        }
        (None, _) => unreachable!(),
    };
    TargetPath::new(poses).map_err(|_| PathError::Parameter("generated poses are not finite"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::pose_error;

    fn spec(shape: PathShape, n: usize) -> PathSpec {
        PathSpec::new(shape, Vector3::zeros(), UnitQuaternion::identity(), n).with_plane(Vector3::x(), Vector3::y())
    }

    #[test]
    fn circle_four_points() {
        let p = generate_path(&spec(PathShape::Circle { radius: 1.0 }, 4)).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (pose, e) in p.poses().iter().zip(expect) {
            assert!((pose.position - Vector3::new(e[0], e[1], 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn circle_spacing_uniform() {
        let p = generate_path(&spec(PathShape::Circle { radius: 0.2 }, 100)).unwrap();
        let poses = p.poses();
        let d0 = (poses[1].position - poses[0].position).norm();
        for w in poses.windows(2) {
            assert!(((w[1].position - w[0].position).norm() - d0).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_sweep() {
        let s = spec(
            PathShape::Rotation {
                axis: Vector3::z(),
                angle: FRAC_PI_2,
            },
            10,
        );
        let p = generate_path(&s).unwrap();
        let poses = p.poses();
        assert!(poses.iter().all(|q| q.position == poses[0].position));
        let (_, rot) = pose_error(&poses[0], &poses[9]);
        assert!((rot - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn square_and_s_are_uniform_and_continuous() {
        for shape in [
            PathShape::Square {
                side: 0.3,
                corner_radius: 0.05,
            },
            PathShape::SCurve { radius: 0.1 },
        ] {
            let p = generate_path(&spec(shape, 120)).unwrap();
            let gaps: Vec<f64> = p.poses().windows(2).map(|w| (w[1].position - w[0].position).norm()).collect();
            let max = gaps.iter().cloned().fold(0.0, f64::max);
            let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
            // Chords across a curved section are slightly shorter than the arc.
            assert!(max - min < 2e-3 * max, "{shape:?}: {min} {max}");
        }
    }

    #[test]
    fn tangent_profile_turns_once_around_circle() {
        let s = spec(PathShape::Circle { radius: 0.1 }, 8).with_profile(OrientationProfile::Tangent);
        let p = generate_path(&s).unwrap();
        let (_, rot) = pose_error(&p.poses()[0], &p.poses()[4]);
        assert!((rot - PI).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_specs() {
        assert_eq!(
            generate_path(&spec(PathShape::Circle { radius: 1.0 }, 1)),
            Err(PathError::TooFewWaypoints(1))
        );
        assert!(generate_path(&spec(PathShape::Circle { radius: -1.0 }, 5)).is_err());
        assert!(generate_path(&spec(
            PathShape::Square {
                side: 0.2,
                corner_radius: 0.2
            },
            5
        ))
        .is_err());
    }

    #[test]
    fn deterministic() {
        let s = spec(PathShape::Glyph { height: 0.1, loops: 3 }, 50);
        assert_eq!(generate_path(&s).unwrap(), generate_path(&s).unwrap());
    }
}
