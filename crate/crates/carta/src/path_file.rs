//! Target paths as CSV.
//!
//! ```text
//! # n=3
//! x,y,z,qw,qx,qy,qz
//! 0.5,0.0,0.3,1.0,0.0,0.0,0.0
//! ...
//! ```
//!
//! Quaternions must be unit length to within `1e-6` and are renormalized on
//! load.

use std::path::Path;

use carta_core::generator::TargetPath;
use carta_core::Pose;
use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::header::{parse_header, read_rows};
use crate::FileError;

pub const PATH_COLUMNS: [&str; 7] = ["x", "y", "z", "qw", "qx", "qy", "qz"];

const UNIT_TOLERANCE: f64 = 1e-6;

pub fn path_to_csv(path: &TargetPath) -> String {
    let mut out = format!("# n={}\n", path.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PATH_COLUMNS).expect("in-memory write");
    for p in path.poses() {
        let q = p.orientation.quaternion();
        let row = [p.position.x, p.position.y, p.position.z, q.w, q.i, q.j, q.k];
        w.write_record(row.iter().map(|v| format!("{v:?}"))).expect("in-memory write");
    }
    out.push_str(core::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("csv output is utf8"));
    out
}

pub fn parse_path(text: &str) -> Result<TargetPath, FileError> {
    let header = parse_header(text, &["n"])?;
    let n = header.usize("n")?;
    let rows = read_rows(text, Some(&PATH_COLUMNS))?.1;
    if rows.len() != n {
        return Err(FileError::Format(format!("header says n={n} but the file has {} rows", rows.len())));
    }
    let poses = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let q = Quaternion::new(r[3], r[4], r[5], r[6]);
            if (q.norm() - 1.0).abs() > UNIT_TOLERANCE {
                return Err(FileError::Format(format!("row {i}: quaternion norm {} is not 1", q.norm())));
            }
            Ok(Pose::new(Vector3::new(r[0], r[1], r[2]), UnitQuaternion::from_quaternion(q)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    TargetPath::new(poses).map_err(|e| FileError::Format(e.to_string()))
}

pub fn load_path(path: &Path) -> Result<TargetPath, FileError> {
    parse_path(&crate::read_text(path)?)
}

pub fn save_path(path: &Path, target: &TargetPath) -> Result<(), FileError> {
    crate::write_text(path, &path_to_csv(target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TargetPath {
        TargetPath::new(vec![
            Pose::from_xyz_rpy([0.5, 0.0, 0.3], [3.0, 0.1, -0.2]),
            Pose::from_xyz_rpy([0.5, 0.1, 0.3], [0.0, 0.0, 0.0]),
            Pose::from_xyz_rpy([1e-20, -0.1, 1.0 / 3.0], [0.2, 0.2, 0.2]),
        ])
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let back = parse_path(&path_to_csv(&p)).unwrap();
        for (a, b) in p.poses().iter().zip(back.poses()) {
            assert_eq!(a.position, b.position);
            assert!(a.orientation.angle_to(&b.orientation) < 1e-15);
        }
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let text = path_to_csv(&sample()).replace("# n=3", "# n=4");
        assert!(matches!(parse_path(&text), Err(FileError::Format(_))));
    }

    #[test]
    fn non_unit_quaternion_is_an_error() {
        let text = "# n=1\nx,y,z,qw,qx,qy,qz\n0,0,0,2,0,0,0\n";
        assert!(parse_path(text).is_err());
        let text = "# n=1\nx,y,z,qw,qx,qy,qz\n0,0,0,1,0,0\n";
        assert!(parse_path(text).is_err());
    }
}
