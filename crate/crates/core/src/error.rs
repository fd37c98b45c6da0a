use thiserror::Error;

pub type Result<T, E = AlignError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no C-alpha atoms found for chain '{0}'")]
    EmptyChain(char),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("refused: {0}")]
    Refused(String),
}

impl AlignError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        AlignError::Contract(msg.into())
    }
}
