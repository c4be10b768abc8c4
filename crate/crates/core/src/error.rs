use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("budget exceeded: {required} evaluations needed, budget is {budget}")]
    BudgetExceeded { required: f64, budget: u64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("rank deficient: expected rank {expected}, found {found}")]
    Rank { expected: usize, found: usize },

    #[error("element is nonzero on zero-density atom {atom}")]
    Support { atom: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
