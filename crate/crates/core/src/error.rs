use alloc::string::String;

/// Errors produced by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(&'static str),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("step called after the episode ended")]
    StepAfterDone,
    #[error("{operation} is not supported by environment `{env}`")]
    Unsupported {
        operation: &'static str,
        env: &'static str,
    },
    #[error("empty sample")]
    EmptySample,
    #[error("policy diverged: non-finite probability ratio")]
    Diverged,
    #[error("generation {generation}: {message}")]
    Generation { generation: u64, message: String },
    #[error("step {step}: {message}")]
    Rollout { step: u64, message: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
