use thiserror::Error;

use crate::series::YearMonth;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed date {value:?} at line {line}: expected YYYY-MM")]
    MalformedDate { value: String, line: usize },

    #[error("column {column:?}: missing value at {date}")]
    MissingValue { column: String, date: YearMonth },

    #[error("column {column:?}: non-positive price {value} at {date}")]
    NonPositivePrice {
        column: String,
        date: YearMonth,
        value: f64,
    },

    #[error("column {column:?}: unparsable value {value:?} at {date}")]
    BadNumber {
        column: String,
        date: YearMonth,
        value: String,
    },

    #[error("duplicate month {0}")]
    DuplicateMonth(YearMonth),

    #[error("month gap: {missing} is missing")]
    MonthGap { missing: YearMonth },

    #[error("column {0:?} not found in table header")]
    UnknownColumn(String),

    #[error("column {0:?} has no observations in the selected window")]
    EmptyColumn(String),

    #[error("table has no header row")]
    MissingHeader,

    #[error("insufficient observations: need more than {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("non-finite result in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("misaligned series: {0}")]
    Misaligned(String),

    #[error("bootstrap aborted: {failed} of {reps} replications failed")]
    BootstrapFailures { failed: usize, reps: usize },

    #[error("event table line {line}: {reason}")]
    BadEvent { line: usize, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
