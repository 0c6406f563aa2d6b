use thiserror::Error;

use crate::parse::ParseError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Symbol(String),
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("order not supported: jet order {found} exceeds the maximum {max}")]
    OrderNotSupported { found: u32, max: u32 },
    #[error("cannot restrict on-shell: {0}")]
    CannotRestrictOnShell(String),
    #[error("not in basis span: offending monomial {monomial}")]
    NotInSpan { monomial: String },
    #[error("ansatz does not reduce: surviving dependence in {term}")]
    AnsatzDoesNotReduce { term: String },
    #[error("dependent invariants: the similarity variables have Jacobian rank < 2")]
    DependentInvariants,
    #[error("invalid ansatz: {0}")]
    InvalidAnsatz(String),
    #[error("jet dependence is not polynomial in {0}")]
    NonPolynomialJet(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("positivity lost at t = {time}")]
    PositivityLost { time: f64 },
    #[error("problem file: {0}")]
    Problem(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
