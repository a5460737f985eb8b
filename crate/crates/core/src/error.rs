use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty training set{}", class.as_ref().map(|c| format!(" for class `{c}`")).unwrap_or_default())]
    EmptyTrainingSet { class: Option<String> },

    #[error("dimension mismatch: expected {expected} features, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("value {value} for `{what}` is outside [0, 1]")]
    OutOfRange { what: String, value: f64 },

    #[error("non-finite feature value at position {index}")]
    NonFinite { index: usize },

    #[error("validation set has no records of class `{0}`")]
    MissingClassInValidation(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unsupported model format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },

    #[error("corrupt model document: {0}")]
    CorruptDocument(String),

    #[error("class `{0}` already present in the ensemble")]
    DuplicateClass(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric value `{value}` at row {row}, column `{column}`")]
    NonNumericValue { row: usize, column: String, value: String },

    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("unknown label `{label}` at row {row}")]
    UnknownLabel { row: usize, label: String },

    #[error("need at least {needed} attack classes, found {found}")]
    TooFewClasses { needed: usize, found: usize },

    #[error("dataset has no `benign` records")]
    MissingBenign,

    #[error("class `{class}` has {count} records, fewer than {k} folds")]
    ClassTooSmall { class: String, count: usize, k: usize },

    #[error("{0} validation set is empty")]
    EmptyValidationSet(&'static str),

    #[error("held-out class has no test instances")]
    EmptyTestSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("leakage detected: {0}")]
    Leakage(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Strips any [`Error::Context`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_io(&self) -> bool {
        match self.root() {
            Error::Io { .. } => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
