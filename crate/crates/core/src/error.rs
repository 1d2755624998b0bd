use thiserror::Error;

/// Errors raised across the engine. Variants map one-to-one onto the failure
/// modes each operation documents.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("graph contains a directed cycle")]
    Cyclic,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("partially directed graph admits no consistent DAG extension")]
    NoConsistentExtension,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rate {0} out of range [0, 1)")]
    RateOutOfRange(f64),
    #[error("correlation submatrix is numerically singular")]
    SingularSubmatrix,
    #[error("column {0} is not discrete")]
    NonDiscreteColumn(usize),
    #[error("column {0} is constant")]
    ConstantColumn(usize),
    #[error("column {0} has no observed values")]
    AllMissingColumn(usize),
    #[error("every column is constant")]
    AllColumnsConstant,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains missing values; impute first")]
    DataContainsMissing,
    #[error("test {test} cannot be applied: {reason}")]
    TestMismatch { test: String, reason: String },
    #[error("series too short: need more than {needed} steps, have {have}")]
    InsufficientLength { needed: usize, have: usize },
    #[error("series too short for the stationarity test")]
    SeriesTooShort,
    #[error("instantaneous system (I - W0^T) is singular")]
    SingularInstantaneousSystem,
    #[error("optimizer did not converge (h = {h:e})")]
    NonConvergence { h: f64 },
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
    #[error("edge {0}->{1} is both required and forbidden")]
    ConflictingConstraints(usize, usize),
    #[error("required edges form a directed cycle")]
    CycleFromConstraints,
    #[error("operation cancelled: runtime budget exhausted")]
    Cancelled,
    #[error("all {0} bootstrap replicates failed")]
    AllReplicatesFailed(usize),
    #[error("malformed csv at row {row}, column {column}: {message}")]
    MalformedCsv { row: usize, column: usize, message: String },
    #[error("io: {0}")]
    Io(String),
    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
