//! Error type shared across the laboratory.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: form has d={form_d}, argument has d={arg_d}")]
    DimensionMismatch { form_d: usize, arg_d: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A request whose exact answer cannot be computed within the declared
    /// integer / floating-point resolution (overflow, no admissible sample
    /// count, cutoff too small to hold the support, ...).
    #[error("resolution exceeded: {0}")]
    Resolution(String),

    #[error("point ({0:?}) is not on the rescaled lattice (component {1} off by {2:.3e} relative)")]
    OffLattice(Vec<f64>, usize, f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, LabError>;
