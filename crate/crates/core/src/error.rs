use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid step function: {0}")]
    InvalidStep(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("no rearrangement-invariant space exists: {0}")]
    NoOptimalSpace(String),
    #[error("associate norm has no closed form for {0}")]
    UnsupportedDual(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code severity used by the command line: invalid input and
    /// hypothesis violations are both reported as 2.
    pub fn severity(&self) -> i32 {
        2
    }
}
