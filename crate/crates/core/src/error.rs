use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row {row}: missing row type")]
    MissingRowType { row: usize },
    #[error("row {row}: invalid target value ({reason})")]
    InvalidTarget { row: usize, reason: String },
    #[error("column `{column}`: {reason}")]
    InvalidCell { column: String, reason: String },
    #[error("label policy: {0}")]
    LabelPolicy(String),
    #[error("split: {0}")]
    Split(String),
    #[error("every feature column was dropped")]
    AllFeaturesDropped,
    #[error("column `{column}` has {cardinality} categories, limit is {max}")]
    Cardinality {
        column: String,
        cardinality: usize,
        max: usize,
    },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("label {0} is not in the class list")]
    UnknownLabel(u32),
    #[error("unknown row type `{0}`")]
    UnknownRowType(String),
    #[error("no class has both positive and negative instances")]
    NoScorableClass,
    #[error("empty input")]
    Empty,
    #[error("row type `{row_type}`: {source}")]
    RowType {
        row_type: String,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_row_type(self, row_type: &str) -> Error {
        Error::RowType {
            row_type: row_type.into(),
            source: Box::new(self),
        }
    }
}
