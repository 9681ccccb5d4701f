use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("population must contain at least one agent")]
    EmptyPopulation,

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("report ({price}, {inv_fisher}) lies outside the type-space bounds")]
    ReportOutOfBounds { price: f64, inv_fisher: f64 },

    #[error("tail envelope never falls below level {level} on the search interval")]
    UnboundedSlack { level: f64 },

    #[error("cannot condition on lowest score {score}: support ends at {upper}")]
    DegenerateConditioning { score: f64, upper: f64 },

    #[error("no participating agents")]
    NoParticipants,
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }
}
