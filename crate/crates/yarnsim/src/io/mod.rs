//! File formats and reports: TOML configuration, CSV frame trajectories,
//! polyline OBJ export, and training reports.

pub mod config;
pub mod frames;
pub mod obj;
pub mod report;

use std::io;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: io::Error },
    #[error("config error: {0}")]
    Config(String),
    #[error("frame file {path}:{line}: {message}")]
    Frames { path: String, line: usize, message: String },
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), IoError> {
    let tmp = path.with_extension("tmp~");
    let wrap = |source: io::Error| IoError::File { path: path.display().to_string(), source };
    std::fs::write(&tmp, contents).map_err(wrap)?;
    std::fs::rename(&tmp, path).map_err(wrap)?;
    Ok(())
}
