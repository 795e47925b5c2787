use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus contains no partner records")]
    EmptyCorpus,

    #[error("MDMQ item `{item}` = {value} is outside 1..=6")]
    OutOfRangeItem { item: &'static str, value: i64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("both records have role {0}")]
    RoleConflict(crate::data::Role),

    #[error("couple mismatch: `{own}` vs `{partner}`")]
    CoupleMismatch { own: String, partner: String },

    #[error("couple `{couple_id}` has no partner record for the requested fusion mode")]
    MissingPartner { couple_id: String },

    #[error("no eligible samples for role {role} under fusion mode {mode}")]
    EmptyDesignMatrix {
        role: crate::data::Role,
        mode: crate::fusion::FusionMode,
    },

    #[error("both classes are required, only class {0} present")]
    SingleClassInput(u8),

    #[error("solver did not converge after {iterations} iterations (KKT residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("{groups} groups cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },

    #[error("recall undefined: no samples of true class {0}")]
    UndefinedRecall(u8),

    #[error("every grid point was disqualified by degenerate inner folds")]
    DegenerateInner,

    #[error("couple `{0}` appears in both training and evaluation partitions")]
    GroupLeak(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(line: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            line,
            message: message.into(),
        }
    }
}
