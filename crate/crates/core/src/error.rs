use thiserror::Error;

/// Errors raised across parsing, transformation, solving and certification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("negative coefficient at line {line}, column {column}")]
    NegativeCoefficient { line: usize, column: usize },
    #[error("undefined variable `{name}` at line {line}, column {column}")]
    UndefinedVariable {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("variable `{0}` is defined twice")]
    DuplicateVariable(String),
    #[error("empty system")]
    EmptySystem,
    #[error("rule probabilities from ({state}, {symbol}) sum to {sum}, expected 1")]
    ProbabilitySumViolation {
        state: String,
        symbol: String,
        sum: String,
    },
    #[error("right-hand side of a rule from ({state}, {symbol}) pushes more than two symbols")]
    RhsTooLong { state: String, symbol: String },
    #[error("invalid back-button process: {0}")]
    InvalidBackButton(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular matrix (zero or tiny pivot in column {column})")]
    SingularMatrix { column: usize },
    #[error("non-finite value produced in floating-point mode")]
    NonFinite,
    #[error("every variable is unproductive")]
    AllVariablesUnproductive,
    #[error("iterate exceeded the divergence bound {bound:e}; the system is probably infeasible")]
    InfeasibleSuspected { bound: f64 },
    #[error("system is not quadratic")]
    NotQuadratic,
    #[error("system is not strongly connected")]
    NotStronglyConnected,
    #[error("system is not flagged as a termination system of a pPDA")]
    NotTerminationSystem,
    #[error("system is not flagged as a termination system of a strict pPDA")]
    NotStrictSystem,
    #[error("no verified upper bound on the least fixed point is available")]
    MissingUpperBound,
    #[error("lower bound has a zero component; run more iterations")]
    ZeroLowerBound,
    #[error("cone vector could not be verified against the upper bound")]
    UnverifiedConeVector,
    #[error("not certifiable: {iterations} iterations do not exceed the threshold {threshold}")]
    NotCertifiable { iterations: u64, threshold: u64 },
    #[error("certification requires exact arithmetic")]
    ExactModeRequired,
    #[error("certification needs a trace produced by Newton's method")]
    NotNewtonTrace,
    #[error("the given upper bound u does not satisfy f(u) <= u")]
    UpperBoundRejected,
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
