//! File formats for every artifact of the pipeline.
//!
//! * binary matrices (`.fnmx`): magic `FNMX`, `u32` version, `u64` rows,
//!   `u64` cols, row-major `f64` payload, then a `u64` checksum (the first
//!   eight bytes of the SHA-256 of everything before it), all little-endian;
//! * CSV with a header row for matrices, Betti curves, persistence diagrams,
//!   merge tables and training logs;
//! * text edge lists for graphs;
//! * JSON for reports, dendrograms and configs;
//! * binary model checkpoints (`.fnmd`) with a JSON architecture header.
//!
//! Writers go through a temporary sibling file and a rename, so readers
//! never observe a half-written artifact.

mod checkpoint;
mod dataset;
mod graph;
mod matrix;
mod tables;

pub use checkpoint::{load_model, save_model};
pub use dataset::{generate_synthetic, load_dataset, load_idx, Dataset, DatasetFormat, SyntheticSpec};
pub use graph::{load_graph, load_network, save_graph, save_network};
pub use matrix::{load_matrix, load_matrix_csv, save_matrix, save_matrix_csv};
pub use tables::{
    load_curves, load_diagrams, load_dissimilarity, load_json, load_training_log, save_curves, save_diagrams,
    save_dissimilarity, save_json, save_merge_table, save_training_log,
};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed at byte {offset}: {message}")]
    Format { path: PathBuf, offset: u64, message: String },
    #[error("{path}: schema error: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: corrupt artifact: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("cannot store non-finite value at index {0}")]
    NonFinite(usize),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn schema(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Schema { path: path.to_path_buf(), message: message.into() }
}

pub(crate) fn corrupt(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Corrupt { path: path.to_path_buf(), message: message.into() }
}

/// First eight bytes of SHA-256, little-endian.
pub(crate) fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub(crate) fn read_all(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(io_err(path))
}

/// Shortest decimal that round-trips to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a text artifact atomically.
pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    write_atomic(path, text.as_bytes())
}

/// Schema error for artifacts validated outside this module.
pub fn schema_error(path: &Path, message: impl Into<String>) -> IoError {
    schema(path, message)
}
