use std::fmt;

/// A single violated bound found while validating a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Dotted path of the offending field, e.g. `aimd.beta`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("derivative requested on a non-differentiable (step) utility")]
    UnsupportedModel,

    #[error("{what}: argument {value} outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("efficiency undefined: optimal objective is {0}")]
    UndefinedEfficiency(f64),

    #[error("price of anarchy undefined: optimal objective is {0}")]
    UndefinedPoa(f64),

    #[error("brute-force oracle supports at most 3 users, got {0}")]
    TooManyUsers(usize),

    #[error("unknown sweep axis `{0}` (expected one of L, C_ratio, n, seed)")]
    UnknownAxis(String),

    #[error("failed to parse scenario: {0}")]
    Parse(String),

    #[error("invalid scenario: {}", join(.0))]
    Validation(Vec<Violation>),
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
