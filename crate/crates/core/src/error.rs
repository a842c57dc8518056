use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sequence {id}: {message}")]
    InvalidSequence { id: String, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("objective is not finite at {0}")]
    NonFinite(&'static str),

    #[error("class {class} has no samples")]
    EmptyClass { class: String },

    #[error("label {label} is not covered by the category map")]
    UnknownCategory { label: String },

    #[error("every parameter combination diverged")]
    AllDiverged,

    #[error("records file contains no records")]
    NoRecords,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    /// True when the failure comes from user input (files, flags) rather
    /// than from a computation that went wrong.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Diverged { .. } | Error::NonFinite(_) | Error::AllDiverged)
    }
}
