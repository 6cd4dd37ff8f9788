use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the isodyn library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch at layer {layer}: expected {expected}, found {found}")]
    Dimension {
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    Shape {
        what: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("SVD did not converge after {sweeps} sweeps (residual {residual:e})")]
    SvdNoConvergence { sweeps: usize, residual: f64 },

    #[error("matrix is not orthogonal (max |RᵀR - I| = {deviation:e})")]
    NotOrthogonal { deviation: f64 },

    #[error("singular system in pseudo-inverse correction; fall back to plain column deletion")]
    SingularCorrection,

    #[error("singular linear system")]
    Singular,

    #[error("surgery rejected: {0}")]
    Surgery(String),

    #[error("layer {layer} is not isotropic: {reason}")]
    NotIsotropic { layer: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] CheckpointError),

    #[error("dataset error: {0}")]
    Data(#[from] DataError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failure modes when reading a checkpoint back from disk.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint truncated: {0}")]
    Truncated(String),
    #[error("checkpoint corrupt: {0}")]
    Corrupt(String),
    #[error("checksum mismatch: manifest says {expected:08x}, blob hashes to {found:08x}")]
    Checksum { expected: u32, found: u32 },
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing dataset files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),
    #[error("corrupt batch file {path}: {len} bytes is not a multiple of {record}")]
    CorruptBatch {
        path: PathBuf,
        len: usize,
        record: usize,
    },
    #[error("empty dataset")]
    Empty,
    #[error("requested subset of {requested} exceeds available {available}")]
    SubsetTooLarge { requested: usize, available: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
