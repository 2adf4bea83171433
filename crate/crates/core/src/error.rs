use crate::gof::GofReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Negative-binomial moment fit needs variance strictly above the mean.
    #[error("negative binomial requires overdispersion: mean {mean} >= variance {variance}")]
    OverdispersionRequired { mean: f64, variance: f64 },

    /// Geometric fit on a support starting at 1 needs a sample mean of at least 1.
    #[error("infeasible support for geometric fit: sample mean {mean} < 1")]
    InfeasibleSupport { mean: f64 },

    /// No candidate distribution passed either the KS or the AD gate.
    #[error("no acceptable fit among {} candidates", reports.len())]
    NoAcceptableFit { reports: Vec<GofReport> },

    /// Empirical VaR is undefined without retained loss samples.
    #[error("no retained loss samples")]
    NoLosses,

    /// Internal invariant violation; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
