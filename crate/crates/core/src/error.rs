use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Shape(String),
    #[error("RelationViolation: {0}")]
    RelationViolation(String),
    #[error("RiemannHurwitzViolation: sum of (cycle length - 1) is {found}, expected {expected}")]
    RiemannHurwitzViolation { found: usize, expected: usize },
    #[error("UnmarkedCriticalValue: {0}")]
    UnmarkedCriticalValue(String),
    #[error("NonSimpleWitness: {0}")]
    NonSimpleWitness(String),
    #[error("PreinvarianceViolation: {0}")]
    PreinvarianceViolation(String),
    #[error("NotInvariant: {0}")]
    NotInvariant(String),
    #[error("BudgetExhausted: {0}")]
    BudgetExhausted(String),
    #[error("ObstructionSuspected: {0}")]
    ObstructionSuspected(String),
    #[error("GluingMismatch: {0}")]
    GluingMismatch(String),
    #[error("NonDynamicalData: {0}")]
    NonDynamicalData(String),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::BudgetExhausted(_) => 3,
            Error::ObstructionSuspected(_) => 4,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
