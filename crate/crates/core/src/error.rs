use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("slot of {what} has zero duration but carries {load} units of load")]
    ZeroDuration { what: &'static str, load: f64 },

    #[error("argument {0} is outside the domain of the principal Lambert W branch")]
    LambertDomain(f64),

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("linear program is malformed: {0}")]
    MalformedLp(String),

    #[error("{count} candidate assignments exceed the enumeration cap of {cap}")]
    TooManyAssignments { count: u128, cap: u128 },

    #[error("scenario file {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Whether the error comes from a numerical failure inside a solver
    /// rather than from bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::ZeroDuration { .. } | Error::LambertDomain(_) | Error::Breakdown(_) | Error::MalformedLp(_))
    }
}
