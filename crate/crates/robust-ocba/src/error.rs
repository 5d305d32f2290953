use crate::truth::Allocation;

/// Library error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The numeric minimizer exhausted its iteration budget. Carries the best
    /// point found so far and its objective value (natural log scale).
    #[error("minimizer did not converge within {iterations} iterations (best log-objective {achieved_log})")]
    NonConvergence {
        iterations: usize,
        achieved_log: f64,
        best: Box<Allocation>,
    },

    #[error("ambiguous oracle: {0}")]
    AmbiguousOracle(String),

    #[error("simulation failure at round {round}: {message}")]
    Simulation { round: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
