//! TOML obstacle lists.
//!
//! ```toml
//! format = 1
//!
//! [[cuboid]]
//! xyz = [0.45, 0.0, 0.1]     # cuboid frame origin, meters
//! rpy = [0.0, 0.0, 0.0]      # cuboid frame orientation, radians
//! min = [-0.05, -0.05, -0.1] # extents in the cuboid frame
//! max = [0.05, 0.05, 0.1]
//! ```

use std::path::Path;

use carta_core::Cuboid;
use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::FileError;

pub const OBSTACLE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleFile {
    pub format: u32,
    #[serde(rename = "cuboid", default)]
    pub cuboids: Vec<CuboidEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuboidEntry {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl CuboidEntry {
    fn to_cuboid(&self, index: usize) -> Result<Cuboid, FileError> {
        let finite = self.xyz.iter().chain(&self.rpy).chain(&self.min).chain(&self.max).all(|v| v.is_finite());
        if !finite {
            return Err(FileError::Format(format!("cuboid {index} has a non-finite value")));
        }
        if (0..3).any(|i| self.min[i] > self.max[i]) {
            return Err(FileError::Format(format!("cuboid {index} has min > max")));
        }
        let pose = Isometry3::from_parts(
            Translation3::new(self.xyz[0], self.xyz[1], self.xyz[2]),
            UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]),
        );
        Ok(Cuboid::new(pose, Vector3::from(self.min), Vector3::from(self.max)))
    }

    fn from_cuboid(c: &Cuboid) -> Self {
        let (r, p, y) = c.pose.rotation.euler_angles();
        let t = c.pose.translation.vector;
        Self {
            xyz: [t.x, t.y, t.z],
            rpy: [r, p, y],
            min: c.min.into(),
            max: c.max.into(),
        }
    }
}

pub fn parse_obstacles(text: &str) -> Result<Vec<Cuboid>, FileError> {
    let file: ObstacleFile = toml::from_str(text).map_err(|e| FileError::Format(e.to_string()))?;
    if file.format != OBSTACLE_FORMAT {
        return Err(FileError::Version {
            expected: OBSTACLE_FORMAT,
            got: file.format,
        });
    }
    file.cuboids.iter().enumerate().map(|(i, c)| c.to_cuboid(i)).collect()
}

pub fn obstacles_to_toml(obstacles: &[Cuboid]) -> String {
    let file = ObstacleFile {
        format: OBSTACLE_FORMAT,
        cuboids: obstacles.iter().map(CuboidEntry::from_cuboid).collect(),
    };
    toml::to_string(&file).expect("obstacle files always serialize")
}

pub fn load_obstacles(path: &Path) -> Result<Vec<Cuboid>, FileError> {
    parse_obstacles(&crate::read_text(path)?)
}

pub fn save_obstacles(path: &Path, obstacles: &[Cuboid]) -> Result<(), FileError> {
    crate::write_text(path, &obstacles_to_toml(obstacles))
}
