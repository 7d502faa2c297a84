use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// An exhaustive computation would exceed the configured budget.
    #[error("resource limit: {what} needs {needed} but the budget is {budget}{}", partial_hint(.partial))]
    Resource {
        what: String,
        needed: u128,
        budget: u128,
        partial: Option<u64>,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

fn partial_hint(partial: &Option<u64>) -> String {
    match partial {
        Some(lb) => format!(" (best lower bound found: {lb})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
