use super::blocked;
use super::pipeline::{draw_samples, ReplicationStreams};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::verification::{verify, VerificationRule};

/// Fraction of replications in which `n` fresh `N(0, true_inv_fisher)`
/// samples fail `rule` against `reported_inv_fisher`.
pub fn empirical_failure_prob(
    true_inv_fisher: f64,
    reported_inv_fisher: f64,
    n: usize,
    rule: &VerificationRule,
    reps: usize,
    stream: &RngStream,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if reps == 0 {
        return Err(Error::param("reps", 0.0, "need at least one replication"));
    }
    let failures = blocked(
        reps,
        |range| -> Result<usize> {
            let mut fails = 0;
            for r in range {
                let data = ReplicationStreams::new(stream, r).data;
                let samples = if rule.uses_samples() {
                    draw_samples(true_inv_fisher, n, &data)
                } else {
                    Vec::new()
                };
                if !verify(rule, &samples, reported_inv_fisher, true_inv_fisher)? {
                    fails += 1;
                }
            }
            Ok(fails)
        },
        |acc: &mut Result<usize>, part| {
            *acc = match (std::mem::replace(acc, Ok(0)), part) {
                (Ok(a), Ok(b)) => Ok(a + b),
                (Err(e), _) | (_, Err(e)) => Err(e),
            }
        },
        Ok(0),
    )?;
    Ok(failures as f64 / reps as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_variance_fails_about_half_the_time() {
        let f = empirical_failure_prob(10.0, 10.0, 200, &VerificationRule::SampleVariance, 5000, &RngStream::new(8))
            .unwrap();
        assert!((0.44..=0.56).contains(&f), "{f}");
    }

    #[test]
    fn lcb_fails_near_alpha() {
        let rule = VerificationRule::lcb(0.05).unwrap();
        let f = empirical_failure_prob(10.0, 10.0, 158, &rule, 5000, &RngStream::new(8)).unwrap();
        assert!((0.02..=0.075).contains(&f), "{f}");
    }

    #[test]
    fn overwhelming_overreport_never_fails() {
        for rule in [VerificationRule::SampleVariance, VerificationRule::lcb(0.05).unwrap(), VerificationRule::ExactOracle] {
            let f = empirical_failure_prob(10.0, 1e7, 100, &rule, 2000, &RngStream::new(1)).unwrap();
            assert!(f <= 0.001);
        }
    }

    #[test]
    fn oracle_is_deterministic() {
        let s = RngStream::new(0);
        assert_eq!(empirical_failure_prob(10.0, 9.0, 10, &VerificationRule::ExactOracle, 7, &s).unwrap(), 1.0);
        assert_eq!(empirical_failure_prob(10.0, 10.0, 10, &VerificationRule::ExactOracle, 7, &s).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_sizes() {
        let s = RngStream::new(0);
        assert!(empirical_failure_prob(1.0, 1.0, 1, &VerificationRule::SampleVariance, 10, &s).is_err());
        assert!(empirical_failure_prob(1.0, 1.0, 10, &VerificationRule::SampleVariance, 0, &s).is_err());
    }
}
