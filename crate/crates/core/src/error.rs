use alloc::string::String;
use core::fmt;

/// Errors raised by the simulator, learner and harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An interacting herder sits exactly on a target; the repulsion is singular.
    CoincidentPositions { target: usize, herder: usize },
    /// A parameter violates its admissible range.
    InvalidParameter {
        field: String,
        value: String,
        allowed: String,
    },
    /// A velocity estimate was requested without time advancing.
    NonAdvancingTime { previous: f64, current: f64 },
    /// Stored table dimensions disagree with the configured grid/action set.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// Training was requested for a mode that has nothing to learn.
    NotTrainable(&'static str),
}

impl Error {
    pub fn invalid(
        field: impl Into<String>,
        value: impl fmt::Display,
        allowed: impl Into<String>,
    ) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            value: alloc::format!("{value}"),
            allowed: allowed.into(),
        }
    }

    /// Prefixes the field path of an `InvalidParameter` error.
    pub fn in_section(self, section: &str) -> Self {
        match self {
            Error::InvalidParameter {
                field,
                value,
                allowed,
            } => Error::InvalidParameter {
                field: alloc::format!("{section}.{field}"),
                value,
                allowed,
            },
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::CoincidentPositions { target, herder } => write!(
                f,
                "herder {herder} coincides with target {target}; repulsion is undefined"
            ),
            Error::InvalidParameter {
                field,
                value,
                allowed,
            } => write!(f, "invalid value {value} for `{field}`: {allowed}"),
            Error::NonAdvancingTime { previous, current } => write!(
                f,
                "velocity estimate needs advancing time (previous t={previous}, current t={current})"
            ),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what} mismatch: expected {expected}, found {found}"),
            Error::NotTrainable(mode) => write!(f, "mode `{mode}` cannot be trained"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
