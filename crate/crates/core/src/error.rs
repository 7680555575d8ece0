use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (length mismatch, bad count, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A value outside the model's domain reached the forward model.
    #[error("domain error: {0}")]
    Domain(String),

    /// A factorization did not succeed even after jitter escalation.
    #[error("numerical failure: {what} (size {size}, last jitter {jitter:e})")]
    Factorization {
        what: &'static str,
        size: usize,
        jitter: f64,
    },

    /// Every particle weight vanished during a Bayes update.
    #[error("inference collapse: all particle weights vanished (log-likelihood range [{min_log_likelihood}, {max_log_likelihood}])")]
    Collapse {
        min_log_likelihood: f64,
        max_log_likelihood: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for errors caused by numerics rather than by the caller or the environment.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Factorization { .. } | Error::Collapse { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_))
    }
}
