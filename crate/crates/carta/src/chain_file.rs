//! TOML chain descriptions.
//!
//! ```toml
//! format = 1
//! name = "arm"
//! ignore_adjacent = 2
//!
//! [[joint]]
//! name = "j1"
//! kind = "revolute"          # revolute | prismatic | fixed
//! origin_xyz = [0.0, 0.0, 0.3]
//! origin_rpy = [0.0, 0.0, 0.0]
//! axis = [0.0, 0.0, 1.0]
//! limits = [-2.9, 2.9]
//!
//! [[capsule]]
//! name = "upper"
//! link = "j1"                # "base" or the name of the parent joint
//! a = [0.0, 0.0, 0.0]
//! b = [0.0, 0.0, 0.3]
//! radius = 0.05
//!
//! ignore = [["upper", "lower"]]
//! ```
//!
//! `ignore_adjacent = k` skips every capsule pair whose links are at most `k`
//! joints apart, in addition to the explicit `ignore` list.

use std::collections::BTreeSet;
use std::path::Path;

use carta_core::kinematics::{JointKind, JointSpec, KinematicChain, LinkCapsule};
use carta_core::Capsule;
use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::FileError;

pub const CHAIN_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub format: u32,
    pub name: String,
    #[serde(default)]
    pub ignore_adjacent: usize,
    #[serde(rename = "joint")]
    pub joints: Vec<JointEntry>,
    #[serde(rename = "capsule", default)]
    pub capsules: Vec<CapsuleEntry>,
    #[serde(default)]
    pub ignore: Vec<[String; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindEntry {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub name: String,
    pub kind: KindEntry,
    #[serde(default)]
    pub origin_xyz: [f64; 3],
    #[serde(default)]
    pub origin_rpy: [f64; 3],
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsuleEntry {
    pub name: String,
    pub link: String,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

fn origin(xyz: [f64; 3], rpy: [f64; 3]) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::new(xyz[0], xyz[1], xyz[2]),
        UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
    )
}

impl ChainFile {
    pub fn parse(text: &str) -> Result<Self, FileError> {
        let file: ChainFile = toml::from_str(text).map_err(|e| FileError::Format(e.to_string()))?;
        if file.format != CHAIN_FORMAT {
            return Err(FileError::Version {
                expected: CHAIN_FORMAT,
                got: file.format,
            });
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("chain files always serialize")
    }

    pub fn build(&self) -> Result<KinematicChain, FileError> {
        let mut joints = Vec::with_capacity(self.joints.len());
        let mut link_of = vec![("base".to_string(), 0usize)];
        for (i, j) in self.joints.iter().enumerate() {
            let o = origin(j.origin_xyz, j.origin_rpy);
            let axis = Vector3::from(j.axis);
            let spec = match (j.kind, j.limits) {
                (KindEntry::Fixed, None) => JointSpec::fixed(j.name.clone(), o),
                (KindEntry::Fixed, Some(_)) => {
                    return Err(FileError::Format(format!("fixed joint {} has limits", j.name)))
                }
                (_, None) => return Err(FileError::Format(format!("joint {} needs limits", j.name))),
                (KindEntry::Revolute, Some([lo, hi])) => JointSpec::revolute(j.name.clone(), o, axis, lo, hi),
                (KindEntry::Prismatic, Some([lo, hi])) => JointSpec::prismatic(j.name.clone(), o, axis, lo, hi),
            };
            if link_of.iter().any(|(n, _)| *n == j.name) {
                return Err(FileError::Format(format!("duplicate joint name {}", j.name)));
            }
            link_of.push((j.name.clone(), i + 1));
            joints.push(spec);
        }
        let lookup = |name: &str| link_of.iter().find(|(n, _)| n == name).map(|(_, l)| *l);
        let mut capsules = Vec::with_capacity(self.capsules.len());
        for c in &self.capsules {
            let link = lookup(&c.link).ok_or_else(|| FileError::Format(format!("capsule {} references unknown link {}", c.name, c.link)))?;
            capsules.push(LinkCapsule {
                link,
                capsule: Capsule::new(Vector3::from(c.a), Vector3::from(c.b), c.radius),
            });
        }
        let capsule_index = |name: &str| {
            self.capsules
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| FileError::Format(format!("ignore pair names unknown capsule {name}")))
        };
        let mut ignore = BTreeSet::new();
        for [a, b] in &self.ignore {
            let (a, b) = (capsule_index(a)?, capsule_index(b)?);
            ignore.insert((a.min(b), a.max(b)));
        }
        for a in 0..capsules.len() {
            for b in a + 1..capsules.len() {
                if capsules[a].link.abs_diff(capsules[b].link) <= self.ignore_adjacent {
                    ignore.insert((a, b));
                }
            }
        }
        Ok(KinematicChain::new(self.name.clone(), joints, capsules, ignore)?)
    }

    /// Inverse of [`ChainFile::build`]; adjacency is written out as explicit pairs.
    pub fn from_chain(chain: &KinematicChain) -> Self {
        let joints: Vec<JointEntry> = chain
            .joints()
            .iter()
            .map(|j| {
                let (r, p, y) = j.origin.rotation.euler_angles();
                let t = j.origin.translation.vector;
                JointEntry {
                    name: j.name.clone(),
                    kind: match j.kind {
                        JointKind::Revolute => KindEntry::Revolute,
                        JointKind::Prismatic => KindEntry::Prismatic,
                        JointKind::Fixed => KindEntry::Fixed,
                    },
                    origin_xyz: [t.x, t.y, t.z],
                    origin_rpy: [r, p, y],
                    axis: [j.axis.x, j.axis.y, j.axis.z],
                    limits: j.limits.map(|(lo, hi)| [lo, hi]),
                }
            })
            .collect();
        let link_name = |l: usize| if l == 0 { "base".to_string() } else { joints[l - 1].name.clone() };
        let capsules: Vec<CapsuleEntry> = chain
            .capsules()
            .iter()
            .enumerate()
            .map(|(i, c)| CapsuleEntry {
                name: format!("c{i}"),
                link: link_name(c.link),
                a: c.capsule.a.into(),
                b: c.capsule.b.into(),
                radius: c.capsule.radius,
            })
            .collect();
        let ignore = chain
            .ignore_pairs()
            .iter()
            .map(|(a, b)| [capsules[*a].name.clone(), capsules[*b].name.clone()])
            .collect();
        ChainFile {
            format: CHAIN_FORMAT,
            name: chain.name().to_string(),
            ignore_adjacent: 0,
            joints,
            capsules,
            ignore,
        }
    }
}

pub fn parse_chain(text: &str) -> Result<KinematicChain, FileError> {
    ChainFile::parse(text)?.build()
}

pub fn load_chain(path: &Path) -> Result<KinematicChain, FileError> {
    parse_chain(&crate::read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
format = 1
name = "two"
ignore_adjacent = 1

[[joint]]
name = "a"
kind = "revolute"
axis = [0.0, 0.0, 1.0]
limits = [-1.0, 1.0]

[[joint]]
name = "b"
kind = "prismatic"
origin_xyz = [0.5, 0.0, 0.0]
axis = [1.0, 0.0, 0.0]
limits = [0.0, 0.2]

[[joint]]
name = "tool"
kind = "fixed"
origin_xyz = [0.1, 0.0, 0.0]

[[capsule]]
name = "base"
link = "base"
a = [0.0, 0.0, -0.2]
b = [0.0, 0.0, -0.1]
radius = 0.05

[[capsule]]
name = "upper"
link = "a"
a = [0.0, 0.0, 0.0]
b = [0.4, 0.0, 0.0]
radius = 0.05

[[capsule]]
name = "slider"
link = "b"
a = [0.0, 0.0, 0.0]
b = [0.1, 0.0, 0.0]
radius = 0.03
"#;

    #[test]
    fn parses_and_builds() {
        let chain = parse_chain(SMALL).unwrap();
        assert_eq!(chain.dof(), 2);
        assert_eq!(chain.kinds(), &[JointKind::Revolute, JointKind::Prismatic]);
        // base-upper and upper-slider are adjacent; only base-slider is checked.
        assert_eq!(chain.self_collision_pairs(), &[(0, 2)]);
    }

    #[test]
    fn round_trips_through_toml() {
        let chain = parse_chain(SMALL).unwrap();
        let again = parse_chain(&ChainFile::from_chain(&chain).to_toml()).unwrap();
        assert_eq!(again.self_collision_pairs(), chain.self_collision_pairs());
        let q = carta_core::Config::from_column_slice(&[0.3, 0.1]);
        let (p, r) = carta_core::kinematics::pose_error(&chain.fk(&q).unwrap(), &again.fk(&q).unwrap());
        assert!(p < 1e-15 && r < 1e-7);
    }

    #[test]
    fn rejects_wrong_version_and_bad_links() {
        assert!(matches!(
            ChainFile::parse(&SMALL.replace("format = 1", "format = 2")),
            Err(FileError::Version { .. })
        ));
        assert!(parse_chain(&SMALL.replace("link = \"b\"", "link = \"nope\"")).is_err());
        assert!(parse_chain(&SMALL.replace("axis = [1.0, 0.0, 0.0]", "axis = [2.0, 0.0, 0.0]")).is_err());
    }
}
