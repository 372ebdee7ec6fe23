use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate token `{0}`")]
    DuplicateToken(String),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("zero-norm vector for token `{0}`")]
    ZeroNorm(String),

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("duplicate pair ({0}, {1})")]
    DuplicatePair(String, String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("activation `{0}` is not supported for double backpropagation")]
    UnsupportedActivation(&'static str),

    #[error("undefined statistic: {0}")]
    Undefined(&'static str),

    #[error("training diverged at epoch {epoch}, step {step}: {quantity} is not finite")]
    Divergence {
        epoch: usize,
        step: usize,
        quantity: &'static str,
    },
}
