//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid argument combination (lengths, bands, grids).
    #[error("argument error: {0}")]
    Argument(String),

    /// Physically impossible input (efficiency above one, detected noise below
    /// the quantum floor, ...).
    #[error("unphysical input: {0}")]
    Unphysical(String),

    /// Requested value outside the achievable range.
    #[error("range error: {msg} (max achievable {max_achievable:.6e})")]
    Range { msg: String, max_achievable: f64 },

    /// Field source placed on the integration path.
    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    /// Calibration feature missing or degenerate.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// Fit initialization failed (no usable feature in the trace).
    #[error("fit initialization error: {0}")]
    FitInit(String),

    /// Fit did not converge; carries the best parameters seen so far.
    #[error("fit did not converge after {iterations} iterations (ssr {ssr:.6e})")]
    FitDiverged {
        iterations: usize,
        ssr: f64,
        best: Vec<f64>,
    },

    /// Config text could not be parsed.
    #[error("config parse error at line {line}, column {column}: {msg}")]
    ConfigParse {
        line: usize,
        column: usize,
        msg: String,
    },

    /// Known field given with the wrong unit suffix.
    #[error("unit mismatch for field `{field}`: expected `{expected}`")]
    UnitMismatch { field: String, expected: String },

    /// Key not part of the schema.
    #[error("unknown config key `{path}`")]
    UnknownKey { path: String },

    /// Required key absent.
    #[error("missing required config key `{path}`")]
    MissingKey { path: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code contract: 0 success, 1 analysis failure (usage errors exit
    /// with 2 through the argument parser).
    pub fn exit_code(&self) -> i32 {
        1
    }
}
