//! Winning advantage ratio
//! `kappa(s) = E[S1 / sqrt(S2) | S1 = s] / E[sqrt(S2) | S1 = s]`.
//!
//! Given the lowest score `S1 = s`, the other `m - 1` scores are i.i.d. from
//! the score prior truncated to `(s, inf)`, so `S2` is the minimum of
//! `m - 1` truncated draws and `kappa(s) = s E[S2^-1/2] / E[S2^1/2]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::blocked;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Distribution of a single seller's score.
pub trait ScorePrior: Sync {
    fn upper(&self) -> f64;

    /// One draw from the prior conditioned on exceeding `s`.
    fn sample_above<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformScores {
    pub lo: f64,
    pub hi: f64,
}

impl UniformScores {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::param("score prior", hi, "need 0 <= lo < hi < inf"));
        }
        Ok(Self { lo, hi })
    }
}

impl ScorePrior for UniformScores {
    fn upper(&self) -> f64 {
        self.hi
    }

    fn sample_above<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        let lo = s.max(self.lo);
        // 1 - u lies in (0, 1], keeping draws strictly above s
        let u: f64 = rng.random();
        lo + (self.hi - lo) * (1.0 - u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub value: f64,
    /// Delta-method standard error of the ratio estimator.
    pub std_error: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
}

impl Moments {
    fn add(&mut self, o: &Moments) {
        self.n += o.n;
        self.a += o.a;
        self.b += o.b;
        self.aa += o.aa;
        self.bb += o.bb;
        self.ab += o.ab;
    }
}

/// Monte Carlo estimate of the winning advantage ratio at lowest score `s`
/// in a population of `m` sellers.
pub fn kappa<P: ScorePrior>(s: f64, prior: &P, m: usize, reps: usize, stream: &RngStream) -> Result<KappaEstimate> {
    if m < 2 {
        return Err(Error::param("m", m as f64, "need at least two sellers"));
    }
    if reps < 2 {
        return Err(Error::param("reps", reps as f64, "need at least two replications"));
    }
    if s.is_nan() || s < 0.0 {
        return Err(Error::param("s", s, "score must be nonnegative"));
    }
    if s >= prior.upper() {
        return Err(Error::DegenerateConditioning {
            score: s,
            upper: prior.upper(),
        });
    }
    if s == 0.0 {
        return Ok(KappaEstimate {
            value: 0.0,
            std_error: 0.0,
            reps,
        });
    }
    let sums = blocked(
        reps,
        |range| {
            let mut acc = Moments::default();
            for r in range {
                let mut rng = stream.index(r as u64).rng();
                let s2 = (1..m).map(|_| prior.sample_above(s, &mut rng)).fold(f64::INFINITY, f64::min);
                let root = s2.sqrt();
                let (a, b) = (1.0 / root, root);
                acc.add(&Moments {
                    n: 1.0,
                    a,
                    b,
                    aa: a * a,
                    bb: b * b,
                    ab: a * b,
                });
            }
            acc
        },
        |acc: &mut Moments, part| acc.add(&part),
        Moments::default(),
    );
    let n = sums.n;
    let (ma, mb) = (sums.a / n, sums.b / n);
    let ratio = ma / mb;
    let var_a = (sums.aa - n * ma * ma) / (n - 1.0);
    let var_b = (sums.bb - n * mb * mb) / (n - 1.0);
    let cov = (sums.ab - n * ma * mb) / (n - 1.0);
    let var_ratio = (var_a - 2.0 * ratio * cov + ratio * ratio * var_b).max(0.0) / (n * mb * mb);
    Ok(KappaEstimate {
        value: s * ratio,
        std_error: s * var_ratio.sqrt(),
        reps,
    })
}

/// Truthful participation is individually rational in large markets when
/// `kappa <= 1 - alpha - epsilon`.
pub fn opt_in_condition(kappa_value: f64, alpha: f64, epsilon: f64) -> bool {
    debug_assert!(alpha > 0.0 && alpha < 1.0 && epsilon >= 0.0);
    kappa_value <= 1.0 - alpha - epsilon
}
