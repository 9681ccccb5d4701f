use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mechanism::{run_second_score, seller_utility, AuctionOutcome};
use crate::model::{Action, AgentType, MechanismParams};
use crate::rng::RngStream;
use crate::verification::{verify, VerificationRule};

/// Fewest samples ever generated for a statistical test; the sample variance
/// needs two.
pub const MIN_SAMPLES: usize = 2;

/// Number of samples actually generated for a real-valued quantity `n*`.
pub fn sample_count(quantity: f64) -> usize {
    if quantity.is_finite() && quantity >= MIN_SAMPLES as f64 {
        quantity.floor() as usize
    } else {
        MIN_SAMPLES
    }
}

/// Substreams owned by one Monte Carlo replication.
#[derive(Debug, Clone)]
pub struct ReplicationStreams {
    pub rivals: RngStream,
    pub data: RngStream,
}

impl ReplicationStreams {
    pub fn new(root: &RngStream, replication: usize) -> Self {
        let rep = root.index(replication as u64);
        Self {
            rivals: rep.named("rivals"),
            data: rep.named("data"),
        }
    }
}

/// `count` draws from `N(0, variance)`: the standard normal stream of
/// `data` scaled by the standard deviation.
pub fn draw_samples(variance: f64, count: usize, data: &RngStream) -> Vec<f64> {
    let sd = variance.sqrt();
    let mut rng = data.rng();
    (0..count)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sd * z
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifiedAuction {
    pub outcome: AuctionOutcome<f64>,
    /// Realized utility of every agent, indexed like the actions.
    pub utilities: Vec<f64>,
    pub samples_drawn: usize,
}

/// Runs the auction, generates the winner's data at its true variance,
/// applies `rule` and settles utilities. A failed test voids the contract:
/// the winner is paid nothing but still bears the cost of the samples.
pub fn run_with_verification(
    actions: &[Action<f64>],
    true_types: &[AgentType<f64>],
    params: &MechanismParams<f64>,
    rule: &VerificationRule,
    data: &RngStream,
) -> Result<VerifiedAuction> {
    if actions.len() != true_types.len() {
        return Err(Error::Domain(format!(
            "{} actions for {} agent types",
            actions.len(),
            true_types.len()
        )));
    }
    let mut outcome = run_second_score(actions, params);
    let Some(w) = outcome.winner else {
        return Ok(VerifiedAuction {
            outcome,
            utilities: vec![0.0; actions.len()],
            samples_drawn: 0,
        });
    };
    let reported = actions[w].report().map(|r| r.inv_fisher).unwrap_or(f64::NAN);
    let truth = true_types[w].inv_fisher;
    let (passed, samples_drawn) = if rule.uses_samples() {
        let samples = draw_samples(truth, sample_count(outcome.quantity), data);
        (verify(rule, &samples, reported, truth)?, samples.len())
    } else {
        (verify::<f64>(rule, &[], reported, truth)?, 0)
    };
    outcome.voided = !passed;
    let utilities = true_types
        .iter()
        .enumerate()
        .map(|(i, t)| seller_utility(&outcome, i, t.cost))
        .collect();
    Ok(VerifiedAuction {
        outcome,
        utilities,
        samples_drawn,
    })
}
