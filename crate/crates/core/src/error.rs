use thiserror::Error;

/// Errors raised by codebook operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An index fell outside its valid range.
    #[error("{what} out of range: {value} not in [0, {bound})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        bound: usize,
    },
    /// A configuration value or combination is invalid.
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    /// Array dimensions disagree with the configuration.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A parameter required by the selected overhead branch is missing.
    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),
    /// A PMI violates a structural invariant of its codebook.
    #[error("malformed PMI: {0}")]
    MalformedPmi(String),
    /// The bit stream could not be parsed.
    #[error("codec: {0}")]
    Codec(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn check_range(what: &'static str, value: usize, bound: usize) -> Result<(), Self> {
        if value < bound {
            Ok(())
        } else {
            Err(Error::OutOfRange { what, value, bound })
        }
    }
}
