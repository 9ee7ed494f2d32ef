use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid shape {0:?}")]
    InvalidShape(Vec<usize>),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidueTooLarge { residue: f64, tolerance: f64 },

    #[error("blur kernel of extent {kernel:?} does not fit grid {grid:?}")]
    KernelLargerThanGrid { kernel: Vec<usize>, grid: Vec<usize> },

    #[error("invalid blur specification: {0}")]
    InvalidBlur(String),

    #[error("blurred signal has zero energy")]
    ZeroBlurredSignal,

    #[error("observable frequency set is empty for chi = {chi}")]
    EmptyObservableSet { chi: f64 },

    #[error("unsupported decomposition depth {levels} for grid {dims:?}")]
    UnsupportedDepth { levels: usize, dims: Vec<usize> },

    #[error("unknown wavelet filter '{0}'")]
    UnknownFilter(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("estimator weights have not been set")]
    WeightsUnset,

    #[error("invalid estimator: {0}")]
    InvalidEstimator(String),

    #[error("orthonormal synthesis family required: {0}")]
    NotOrthonormalFlavor(String),

    #[error("no threshold below max|H| = {max_response} satisfies the risk reliability rule")]
    NoAdmissibleChi { max_response: f64 },

    #[error("normal equations are singular: {0}")]
    SingularSystem(String),

    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    InvalidCovariance { min_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("report error: {0}")]
    Report(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Report(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Report(e.to_string())
    }
}
