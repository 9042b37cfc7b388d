use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by every stage of the pipeline.
#[derive(Debug)]
pub enum Error {
    Io(std::io::Error),
    /// A CSV cell did not parse. `row` is 1-based over data rows, `column` is the header name.
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    /// A CSV row had the wrong number of cells.
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },
    EmptyDataset,
    MissingLabels,
    /// Feature vector length disagrees with what a model or dataset expects.
    Shape {
        expected: usize,
        found: usize,
    },
    /// Invalid configuration value.
    Config(String),
    /// The operation needs both classes present.
    MissingClass(String),
    /// AUC is undefined without both positives and negatives.
    UndefinedAuc,
    /// Training produced non-finite values.
    Diverged(String),
    /// A serialized model or table could not be read back.
    Document(String),
    UnknownLearner(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io(e) => write!(f, "i/o error: {}", e),
            Error::Parse {
                row,
                column,
                message,
            } => write!(f, "parse error at row {}, column '{}': {}", row, column, message),
            Error::Arity {
                row,
                expected,
                found,
            } => write!(f, "row {} has {} cells, expected {}", row, found, expected),
            Error::EmptyDataset => write!(f, "dataset is empty"),
            Error::MissingLabels => write!(f, "dataset has no class labels"),
            Error::Shape { expected, found } => {
                write!(f, "shape mismatch: expected {} features, got {}", expected, found)
            }
            Error::Config(msg) => write!(f, "invalid configuration: {}", msg),
            Error::MissingClass(msg) => write!(f, "missing class: {}", msg),
            Error::UndefinedAuc => write!(f, "ROC AUC is undefined for single-class input"),
            Error::Diverged(msg) => write!(f, "training diverged: {}", msg),
            Error::Document(msg) => write!(f, "malformed document: {}", msg),
            Error::UnknownLearner(name) => write!(f, "unknown learner '{}'", name),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
