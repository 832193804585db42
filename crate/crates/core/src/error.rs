use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed input row; `row` is 1-based and counts the header as row 1.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("column `{column}` has {levels} levels (limit {limit})")]
    Cardinality {
        column: String,
        levels: usize,
        limit: usize,
    },

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("group coverage: {0}")]
    GroupCoverage(String),

    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("measure not applicable: {0}")]
    NotApplicable(String),

    #[error("degenerate feature: {0}")]
    DegenerateFeature(String),

    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("infeasible weight box: {0}")]
    InfeasibleBox(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("invalid status: {0}")]
    Status(String),

    #[error("restore error: {0}")]
    Restore(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
