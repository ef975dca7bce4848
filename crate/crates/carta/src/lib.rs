//! File formats, builtin benchmark problems and the command line for the
//! `carta` planner. The planning algorithms live in `carta-core`.

use std::path::Path;

pub use carta_core;

pub mod builtin;
pub mod candidates_file;
pub mod chain_file;
pub mod cli;
pub mod header;
pub mod obstacle_file;
pub mod path_file;
pub mod report;
pub mod suite;
pub mod trajectory_file;
mod wall_clock;

pub use wall_clock::WallClock;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported format version {got}, expected {expected}")]
    Version { expected: u32, got: u32 },
    #[error(transparent)]
    Chain(#[from] carta_core::ChainError),
}

pub(crate) fn read_text(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), FileError> {
    std::fs::write(path, text).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}
