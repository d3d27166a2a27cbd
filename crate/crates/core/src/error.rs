use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input; `index` names the offending record when there is one.
    #[error("{context}: {}{message}", .index.map(|i| format!("record {i}: ")).unwrap_or_default())]
    Parse {
        context: &'static str,
        index: Option<usize>,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("image ids without a matching record: {missing:?}")]
    Join { missing: Vec<u64> },

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(context: &'static str, message: impl Into<String>) -> Self {
        Error::Parse {
            context,
            index: None,
            message: message.into(),
        }
    }

    pub(crate) fn parse_at(
        context: &'static str,
        index: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            context,
            index: Some(index),
            message: message.into(),
        }
    }

    pub(crate) fn dims(what: &str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension(format!("{what}: {left:?} vs {right:?}"))
    }
}
