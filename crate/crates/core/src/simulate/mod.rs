//! Monte Carlo evaluation of seller incentives under the verified auction.
//!
//! Every replication `r` owns the substreams `root/r/"rivals"` and
//! `root/r/"data"`. Replications are processed in fixed-size blocks whose
//! partial aggregates are merged in block order, so results do not depend
//! on the number of worker threads.

mod failure;
mod incentives;
mod kappa;
mod pipeline;

pub use failure::empirical_failure_prob;
pub use incentives::{
    best_response_curve, interim_utility, participation_map, winning_utility, BestResponseCurve, IncentiveModel,
    ParticipationCell,
};
pub use kappa::{kappa, opt_in_condition, KappaEstimate, ScorePrior, UniformScores};
pub use pipeline::{draw_samples, run_with_verification, sample_count, ReplicationStreams, VerifiedAuction, MIN_SAMPLES};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Replications per aggregation block.
pub(crate) const BLOCK: usize = 64;

/// Monte Carlo mean of a seller's realized utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(reps)`.
    pub std_error: f64,
    pub reps: usize,
}

/// Running mean and sum of squared deviations; mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub(crate) fn estimate(&self) -> UtilityEstimate {
        let std_error = if self.n > 1 {
            (self.m2.max(0.0) / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
        } else {
            0.0
        };
        UtilityEstimate {
            mean: self.mean,
            std_error,
            reps: self.n,
        }
    }
}

/// Runs `block(range)` over fixed replication blocks in parallel and folds
/// the partial results in block order.
pub(crate) fn blocked<A, F, M>(reps: usize, block: F, mut merge: M, init: A) -> A
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync,
    M: FnMut(&mut A, A),
{
    let blocks = reps.div_ceil(BLOCK);
    let parts: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| block(b * BLOCK..((b + 1) * BLOCK).min(reps)))
        .collect();
    let mut acc = init;
    for part in parts {
        merge(&mut acc, part);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 113) as f64 * 0.37 - 9.0).collect();
        let mut seq = Welford::default();
        xs.iter().for_each(|&x| seq.push(x));
        let mut merged = Welford::default();
        for chunk in xs.chunks(64) {
            let mut w = Welford::default();
            chunk.iter().for_each(|&x| w.push(x));
            merged.merge(&w);
        }
        assert_eq!(seq.n, merged.n);
        assert!((seq.mean - merged.mean).abs() < 1e-12);
        assert!((seq.m2 - merged.m2).abs() < 1e-8 * seq.m2);
    }

    #[test]
    fn single_replication_has_zero_std_error() {
        let mut w = Welford::default();
        w.push(3.0);
        let e = w.estimate();
        assert_eq!((e.mean, e.std_error, e.reps), (3.0, 0.0, 1));
    }

    #[test]
    fn blocked_is_thread_count_independent() {
        let run = || {
            blocked(
                1000,
                |r| {
                    let mut w = Welford::default();
                    r.for_each(|i| w.push((i as f64).sin()));
                    w
                },
                |a, b| a.merge(&b),
                Welford::default(),
            )
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap().install(run);
        assert_eq!(one, many);
    }
}
