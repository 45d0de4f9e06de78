use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value iteration did not converge within {max_iter} iterations (residual {residual:e})")]
    NonConvergence { max_iter: usize, residual: f64 },

    #[error("policy iteration did not converge within {0} sweeps")]
    PolicyIterationLimit(usize),

    #[error("invalid discount: {0}")]
    InvalidDiscount(String),

    #[error("malformed path: {0}")]
    MalformedPath(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("argument outside function domain: {0}")]
    Domain(String),

    #[error("root finding did not converge for p={p}, a={a}, b={b}")]
    InverseNonConvergence { p: f64, a: f64, b: f64 },

    #[error("no feasible sample count: {0}")]
    Infeasible(String),

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("invalid environment parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid epsilon {0}: need 0 <= epsilon * (non-optimal actions) < 1")]
    InvalidEpsilon(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
