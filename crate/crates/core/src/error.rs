use thiserror::Error;

use crate::model::{CatalogError, MixtureViolation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Catalog(#[from] CatalogError),

    #[error("invalid mixture weights: {0}")]
    Mixture(#[from] MixtureViolation),

    #[error("invalid {what}: {reason}")]
    InvalidInput { what: &'static str, reason: String },

    #[error("insufficient data for {domain}: {reason}")]
    InsufficientData { domain: String, reason: String },

    #[error("degenerate fit for {domain}: {reason}")]
    DegenerateFit { domain: String, reason: String },

    #[error("effective budget for target {target} is not positive; predicted loss is unbounded")]
    ZeroBudget { target: usize },

    #[error("floor {floor} is infeasible for {domains} domains (floor * K must be < 1)")]
    InfeasibleFloor { floor: f64, domains: usize },

    #[error("data-proportional mixture requires volume counts in the catalog")]
    MissingCounts,
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            what,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Catalog(_) => "invalid_catalog",
            Error::Mixture(_) => "invalid_mixture",
            Error::InvalidInput { .. } => "invalid_input",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DegenerateFit { .. } => "degenerate_fit",
            Error::ZeroBudget { .. } => "zero_budget",
            Error::InfeasibleFloor { .. } => "infeasible_floor",
            Error::MissingCounts => "missing_counts",
        }
    }
}
