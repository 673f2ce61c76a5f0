use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty schedule")]
    EmptySchedule,

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("zero aggregation error (degenerate)")]
    DegenerateMse,

    #[error("infeasible: computation SNR <= 1")]
    NonPositiveRate,

    #[error("infeasible start: computation SNR {0} <= 1")]
    InfeasibleStart(f64),

    #[error("no feasible schedule")]
    NoFeasibleSchedule,

    #[error("degenerate weights")]
    DegenerateWeights,

    #[error("receive scale must be positive")]
    ZeroReceiveScale,

    #[error("waveguide too short: {n} elements at spacing {spacing} m need more than {length} m")]
    WaveguideTooShort { n: usize, spacing: f64, length: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("wrong magic number {found:#010x} in {path}, expected {expected:#010x}")]
    WrongMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("truncated IDX file {path}: need {needed} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        needed: usize,
        found: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptySchedule => "empty_schedule",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DegenerateMse => "degenerate_mse",
            Error::NonPositiveRate => "non_positive_rate",
            Error::InfeasibleStart(_) => "infeasible_start",
            Error::NoFeasibleSchedule => "no_feasible_schedule",
            Error::DegenerateWeights => "degenerate_weights",
            Error::ZeroReceiveScale => "zero_receive_scale",
            Error::WaveguideTooShort { .. } => "waveguide_too_short",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::EmptyDataset => "empty_dataset",
            Error::Config { .. } => "config",
            Error::WrongMagic { .. } => "wrong_magic",
            Error::Truncated { .. } => "truncated",
            Error::CountMismatch { .. } => "count_mismatch",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch {
            what,
            got,
            expected,
        });
    }
    Ok(())
}
