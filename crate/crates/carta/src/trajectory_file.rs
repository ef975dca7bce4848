//! Joint trajectories as CSV, one row per timestep.
//!
//! ```text
//! # chain=panda n=100 d=7
//! panda_joint1,...,panda_joint7
//! 0.1,...
//! ```
//!
//! Values are written in shortest round-trip form, so a written file reads
//! back bit for bit and equal trajectories give byte-identical files.

use std::path::Path;

use carta_core::kinematics::JointKind;
use carta_core::{Config, KinematicChain, Trajectory};

use crate::header::{parse_header, read_rows};
use crate::FileError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub chain: String,
    pub columns: Vec<String>,
    pub trajectory: Trajectory,
}

fn actuated_names(chain: &KinematicChain) -> Vec<String> {
    chain
        .joints()
        .iter()
        .filter(|j| j.kind != JointKind::Fixed)
        .map(|j| j.name.clone())
        .collect()
}

pub fn trajectory_to_csv(chain: &KinematicChain, traj: &Trajectory) -> String {
    let mut out = format!("# chain={} n={} d={}\n", chain.name(), traj.len(), chain.dof());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(actuated_names(chain)).expect("in-memory write");
    for q in traj.configs() {
        w.write_record(q.iter().map(|v| format!("{v:?}"))).expect("in-memory write");
    }
    out.push_str(core::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("csv output is utf8"));
    out
}

pub fn parse_trajectory(text: &str) -> Result<TrajectoryFile, FileError> {
    let header = parse_header(text, &["chain", "n", "d"])?;
    let (n, d) = (header.usize("n")?, header.usize("d")?);
    let (columns, rows) = read_rows(text, None)?;
    if columns.len() != d {
        return Err(FileError::Format(format!("header says d={d} but there are {} columns", columns.len())));
    }
    if rows.len() != n {
        return Err(FileError::Format(format!("header says n={n} but the file has {} rows", rows.len())));
    }
    Ok(TrajectoryFile {
        chain: header.str("chain")?.to_string(),
        columns,
        trajectory: Trajectory::new(rows.iter().map(|r| Config::from_column_slice(r)).collect()),
    })
}

/// Reads a trajectory and checks that it was written for `chain`.
pub fn parse_trajectory_for(text: &str, chain: &KinematicChain) -> Result<Trajectory, FileError> {
    let file = parse_trajectory(text)?;
    if file.chain != chain.name() {
        return Err(FileError::Format(format!(
            "trajectory is for chain `{}`, not `{}`",
            file.chain,
            chain.name()
        )));
    }
    if file.columns != actuated_names(chain) {
        return Err(FileError::Format("trajectory columns do not match the chain's joints".into()));
    }
    Ok(file.trajectory)
}

pub fn load_trajectory(path: &Path, chain: &KinematicChain) -> Result<Trajectory, FileError> {
    parse_trajectory_for(&crate::read_text(path)?, chain)
}

pub fn save_trajectory(path: &Path, chain: &KinematicChain, traj: &Trajectory) -> Result<(), FileError> {
    crate::write_text(path, &trajectory_to_csv(chain, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::panda;

    fn sample(chain: &KinematicChain) -> Trajectory {
        let q = |s: f64| Config::from_iterator(chain.dof(), (0..chain.dof()).map(|j| s * (j as f64 + 1.0) / 7.0));
        Trajectory::new(vec![q(0.1), q(-1e-17), q(1.0 / 3.0)])
    }

    #[test]
    fn round_trip_is_bitwise() {
        let chain = panda();
        let t = sample(&chain);
        let text = trajectory_to_csv(&chain, &t);
        assert!(text.starts_with("# chain=panda n=3 d=7\n"));
        let back = parse_trajectory_for(&text, &chain).unwrap();
        assert_eq!(back, t);
        assert_eq!(trajectory_to_csv(&chain, &back), text);
    }

    #[test]
    fn wrong_chain_or_shape_is_an_error() {
        let chain = panda();
        let text = trajectory_to_csv(&chain, &sample(&chain));
        assert!(parse_trajectory_for(&text.replace("chain=panda", "chain=fetch_arm"), &chain).is_err());
        assert!(parse_trajectory(&text.replace("n=3", "n=2")).is_err());
        assert!(parse_trajectory(&text.replace("d=7", "d=8")).is_err());
    }
}
