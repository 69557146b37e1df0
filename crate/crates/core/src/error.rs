use thiserror::Error;

use crate::domain::PatientId;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("no feasible placement for patient {0}")]
    Unplaceable(PatientId),
    #[error("patient {0} has no column in the pool")]
    UncoveredPatient(PatientId),
    #[error("schedule rejected: {0}")]
    InfeasibleSchedule(String),
    #[error("linear program is infeasible (rows {rows:?})")]
    LpInfeasible { rows: Vec<usize> },
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("no feasible incumbent found before the time limit")]
    NoIncumbent,
    #[error("time limit reached")]
    TimeLimit,
    #[error("search refused: {0}")]
    Refused(String),
    #[error("usage: {0}")]
    Usage(String),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: expected {expected} document version {expected_version}, found {found} version {found_version}")]
    Version {
        path: String,
        expected: &'static str,
        expected_version: u32,
        found: String,
        found_version: u32,
    },
    #[error("{path}: {source}")]
    Domain {
        path: String,
        #[source]
        source: DomainError,
    },
}
