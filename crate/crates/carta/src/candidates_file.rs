//! Binary candidate-plan files, the input of the stored-plan generator.
//!
//! Layout, all integers and floats little endian:
//!
//! | bytes | content                                  |
//! |-------|------------------------------------------|
//! | 8     | magic `CARTAKND`                         |
//! | 4     | format version (1)                       |
//! | 8 × 3 | `K`, `n`, `d`                            |
//! | 8     | 64-bit FNV-1a hash of the chain name     |
//! | 8 × K·n·d | configurations, plan-major then waypoint |

use std::path::Path;

use carta_core::generator::{StoredPlans, TargetPath};
use carta_core::KinematicChain;

use crate::FileError;

pub const MAGIC: &[u8; 8] = b"CARTAKND";
pub const CANDIDATES_FORMAT: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 * 4;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn encode_candidates(plans: &StoredPlans, chain_name: &str) -> Vec<u8> {
    let (k, n, d) = plans.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + plans.data().len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CANDIDATES_FORMAT.to_le_bytes());
    for v in [k as u64, n as u64, d as u64, fnv1a64(chain_name.as_bytes())] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in plans.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatesHeader {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub chain_hash: u64,
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("slice of length 8"))
}

pub fn decode_candidates(bytes: &[u8]) -> Result<(CandidatesHeader, StoredPlans), FileError> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(FileError::Format("not a candidate-plan file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("slice of length 4"));
    if version != CANDIDATES_FORMAT {
        return Err(FileError::Version {
            expected: CANDIDATES_FORMAT,
            got: version,
        });
    }
    let dims: Vec<usize> = (0..3)
        .map(|i| usize::try_from(u64_at(bytes, 12 + 8 * i)))
        .collect::<Result<_, _>>()
        .map_err(|_| FileError::Format("plan dimensions overflow".into()))?;
    let header = CandidatesHeader {
        k: dims[0],
        n: dims[1],
        d: dims[2],
        chain_hash: u64_at(bytes, 36),
    };
    let count = header
        .k
        .checked_mul(header.n)
        .and_then(|c| c.checked_mul(header.d))
        .ok_or_else(|| FileError::Format("plan dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if Some(body.len()) != count.checked_mul(8) {
        return Err(FileError::Format(format!(
            "header promises {count} values but the body has {} bytes",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of length 8")))
        .collect();
    let plans = StoredPlans::new(header.k, header.n, header.d, data).map_err(|e| FileError::Format(e.to_string()))?;
    Ok((header, plans))
}

/// Loads stored plans and checks them against the chain and path they will
/// be replayed on.
pub fn file_adapter(path: &Path, chain: &KinematicChain, target: &TargetPath) -> Result<StoredPlans, FileError> {
    let bytes = std::fs::read(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (header, plans) = decode_candidates(&bytes)?;
    if header.chain_hash != fnv1a64(chain.name().as_bytes()) {
        return Err(FileError::Format(format!("plans were not written for chain `{}`", chain.name())));
    }
    if header.d != chain.dof() {
        return Err(FileError::Format(format!("plans have d={} but the chain has {}", header.d, chain.dof())));
    }
    if header.n != target.len() {
        return Err(FileError::Format(format!("plans have n={} but the path has {}", header.n, target.len())));
    }
    Ok(plans)
}

pub fn save_candidates(path: &Path, plans: &StoredPlans, chain_name: &str) -> Result<(), FileError> {
    std::fs::write(path, encode_candidates(plans, chain_name)).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}
