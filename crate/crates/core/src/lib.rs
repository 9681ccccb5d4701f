//! Procurement auctions for data of heterogeneous quality.
//!
//! Sellers hold a private per-sample cost and inverse Fisher information.
//! The buyer ranks them by price per unit of information, pays the winner
//! the runner-up's score per unit of its reported information, buys the
//! loss-optimal quantity at that price, and may void the contract when an
//! ex post test on the delivered data contradicts the reported quality.
//!
//! The auction algebra ([`mechanism`]) and the verification statistics
//! ([`verification`]) are generic over [`Scalar`] (`f32` or `f64`). Monte
//! Carlo analysis ([`simulate`]) runs in `f64`.

pub mod error;
pub mod mechanism;
pub mod model;
pub mod rng;
mod scalar;
pub mod simulate;
pub mod verification;

pub use error::{Error, Result};
pub use mechanism::{
    mechanism_quantity, optimal_loss, optimal_quantity, principal_loss, relative_regret, run_second_score,
    seller_utility, AuctionOutcome,
};
pub use model::{
    n_lower_bound, sample_types, score, Action, AgentType, Bounds, MechanismParams, Prior, Report, TieBreak,
    UniformInterval,
};
pub use rng::RngStream;
pub use scalar::Scalar;
pub use verification::{
    lcb_statistic, sample_variance, slack_lower, slack_upper, verify, TailEnvelope, VerificationRule,
};

pub type AgentTypeF64 = AgentType<f64>;
pub type AgentTypeF32 = AgentType<f32>;
pub type BoundsF64 = Bounds<f64>;
pub type BoundsF32 = Bounds<f32>;
pub type PriorF64 = Prior<f64>;
pub type ReportF64 = Report<f64>;
pub type ReportF32 = Report<f32>;
pub type ActionF64 = Action<f64>;
pub type ActionF32 = Action<f32>;
pub type MechanismParamsF64 = MechanismParams<f64>;
pub type MechanismParamsF32 = MechanismParams<f32>;
pub type AuctionOutcomeF64 = AuctionOutcome<f64>;
pub type AuctionOutcomeF32 = AuctionOutcome<f32>;
