use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndiiError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("simulation failure: {0}")]
    SimulationFailure(String),
    #[error("non-positive conditional variance at t = {t}")]
    NonPositiveVariance { t: usize },
    #[error("parameter outside criterion domain: {0}")]
    Domain(String),
    #[error("no strictly feasible starting point: {0}")]
    Infeasible(String),
    #[error("no convergence after {iterations} iterations: {reason}")]
    NoConvergence { iterations: usize, reason: String },
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("negative score statistic {0} (criterion not locally concave)")]
    NonConcavity(f64),
    #[error("rank deficient: columns {0:?} are linearly dependent on the others")]
    RankDeficient(Vec<usize>),
    #[error("not identified: {0}")]
    NotIdentified(String),
    #[error("inadmissible selection block: {0}")]
    Inadmissible(String),
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("too many failed replications: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },
    #[error("io: {0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
    #[error("at theta = {theta:?}: {source}")]
    AtTheta { theta: Vec<f64>, source: Box<IndiiError> },
}

impl IndiiError {
    pub fn at_theta(self, theta: &[f64]) -> Self {
        match self {
            e @ IndiiError::AtTheta { .. } => e,
            e => IndiiError::AtTheta { theta: theta.to_vec(), source: Box::new(e) },
        }
    }
}

pub type Result<T> = std::result::Result<T, IndiiError>;

impl From<std::io::Error> for IndiiError {
    fn from(e: std::io::Error) -> Self {
        IndiiError::Io(e.to_string())
    }
}
