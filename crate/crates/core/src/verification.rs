//! Ex post quality tests on delivered Gaussian samples and the tail
//! envelopes that bound how far a seller can profitably misreport.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::Bounds;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VerificationRule {
    /// Pass iff the sample variance does not exceed the report.
    SampleVariance,
    /// Pass iff the one-sided lower confidence bound `Q_n(alpha)` does not
    /// exceed the report.
    Lcb { alpha: f64 },
    /// Pass iff the true inverse Fisher information does not exceed the report.
    ExactOracle,
}

impl VerificationRule {
    pub fn lcb(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::Lcb { alpha })
    }

    /// Whether the rule inspects delivered samples.
    pub fn uses_samples(&self) -> bool {
        !matches!(self, Self::ExactOracle)
    }

    pub fn label(&self) -> String {
        match self {
            Self::SampleVariance => "sample-variance".to_owned(),
            Self::Lcb { alpha } => format!("lcb({alpha})"),
            Self::ExactOracle => "exact-oracle".to_owned(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", alpha, "must lie strictly inside (0, 1)"))
    }
}

/// Standard normal quantile `z_p`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_alpha(p)?;
    Ok(Normal::standard().inverse_cdf(p))
}

/// Central moments with divisor `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralMoments<T> {
    pub n: usize,
    pub mean: T,
    pub variance: T,
    pub fourth: T,
}

impl<T: Scalar> CentralMoments<T> {
    /// Two-pass computation. Needs at least two samples.
    pub fn of(samples: &[T]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        let nt = T::from_usize(n).unwrap();
        let mean = samples.iter().fold(T::zero(), |acc, &x| acc + x) / nt;
        let (m2, m4) = samples.iter().fold((T::zero(), T::zero()), |(m2, m4), &x| {
            let d2 = (x - mean) * (x - mean);
            (m2 + d2, m4 + d2 * d2)
        });
        Ok(Self {
            n,
            mean,
            variance: m2 / nt,
            fourth: m4 / nt,
        })
    }

    /// `Q_n = S^2 - z / sqrt(n) * sqrt(mu4 - S^4)`, radicand clamped at zero.
    pub fn lcb(&self, z: T) -> T {
        lcb_from_moments(self.variance, self.fourth, self.n, z)
    }
}

pub fn lcb_from_moments<T: Scalar>(variance: T, fourth: T, n: usize, z: T) -> T {
    let radicand = (fourth - variance * variance).max(T::zero());
    variance - z / T::from_usize(n).unwrap().sqrt() * radicand.sqrt()
}

/// `(1/n) sum (x - mean)^2`.
pub fn sample_variance<T: Scalar>(samples: &[T]) -> Result<T> {
    CentralMoments::of(samples).map(|m| m.variance)
}

/// `(1/n) sum (x - mean)^4`.
pub fn fourth_central_moment<T: Scalar>(samples: &[T]) -> Result<T> {
    CentralMoments::of(samples).map(|m| m.fourth)
}

/// One-sided `(1 - alpha)` lower confidence bound for the variance.
pub fn lcb_statistic<T: Scalar>(samples: &[T], alpha: f64) -> Result<T> {
    let z = normal_quantile(1.0 - alpha)?;
    Ok(CentralMoments::of(samples)?.lcb(T::lit(z)))
}

/// Applies `rule` to delivered samples; `true` means the contract stands.
///
/// `true_inv_fisher` is only consulted by [`VerificationRule::ExactOracle`].
pub fn verify<T: Scalar>(rule: &VerificationRule, samples: &[T], reported_inv_fisher: T, true_inv_fisher: T) -> Result<bool> {
    let estimate = match *rule {
        VerificationRule::ExactOracle => true_inv_fisher,
        VerificationRule::SampleVariance => sample_variance(samples)?,
        VerificationRule::Lcb { alpha } => lcb_statistic(samples, alpha)?,
    };
    Ok(estimate <= reported_inv_fisher)
}

/// Streaming mean and second to fourth central moments, so that statistics
/// of every prefix of a sample stream can be read off in one pass.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentAccumulator<T> {
    n: usize,
    mean: T,
    m2: T,
    m3: T,
    m4: T,
}

impl<T: Scalar> MomentAccumulator<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: T) {
        let n1 = T::from_usize(self.n).unwrap();
        self.n += 1;
        let n = T::from_usize(self.n).unwrap();
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        let three = T::lit(3.0);
        self.mean = self.mean + delta_n;
        self.m4 = self.m4 + term1 * delta_n2 * (n * n - three * n + three) + T::lit(6.0) * delta_n2 * self.m2
            - T::lit(4.0) * delta_n * self.m3;
        self.m3 = self.m3 + term1 * delta_n * (n - T::lit(2.0)) - three * delta_n * self.m2;
        self.m2 = self.m2 + term1;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn moments(&self) -> Result<CentralMoments<T>> {
        if self.n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: self.n });
        }
        let n = T::from_usize(self.n).unwrap();
        Ok(CentralMoments {
            n: self.n,
            mean: self.mean,
            variance: self.m2 / n,
            fourth: self.m4 / n,
        })
    }
}

/// Sub-Gaussian envelopes for the density (`phi`) and lower tail (`zeta`)
/// of a verification statistic at sample size `n`:
/// `phi_n(u) = C1 sqrt(n) exp(-C2 n u^2 / v_hi^2)`,
/// `zeta_n(u) = C3 exp(-C4 n u^2 / v_hi^2)`.
///
/// The constants are order-of-magnitude knobs, not calibrated bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub v_hi: f64,
}

impl TailEnvelope {
    pub fn gaussian(v_hi: f64) -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            v_hi,
        }
    }

    pub fn with_constants(mut self, c1: f64, c2: f64, c3: f64, c4: f64) -> Result<Self> {
        for (name, c) in [("c1", c1), ("c2", c2), ("c3", c3), ("c4", c4)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::param(name, c, "envelope constants must be positive"));
            }
        }
        self.c1 = c1;
        self.c2 = c2;
        self.c3 = c3;
        self.c4 = c4;
        Ok(self)
    }

    pub fn phi(&self, n: f64, u: f64) -> f64 {
        self.c1 * n.sqrt() * (-self.c2 * n * u * u / (self.v_hi * self.v_hi)).exp()
    }

    pub fn zeta(&self, n: f64, u: f64) -> f64 {
        self.c3 * (-self.c4 * n * u * u / (self.v_hi * self.v_hi)).exp()
    }

    /// Closed-form inverse of `zeta_n(delta) = level`, zero if the envelope
    /// already starts below `level`.
    pub fn zeta_inverse(&self, n: f64, level: f64) -> f64 {
        self.v_hi * ((self.c3 / level).ln().max(0.0) / (self.c4 * n)).sqrt()
    }

    /// Closed-form inverse of `phi_n(delta) = level`.
    pub fn phi_inverse(&self, n: f64, level: f64) -> f64 {
        self.v_hi * ((self.c1 * n.sqrt() / level).ln().max(0.0) / (self.c2 * n)).sqrt()
    }
}

const SLACK_TOL: f64 = 1e-9;

/// Smallest `delta` in `[1e-9, 10 v_hi]` with `f(delta) <= level`, for a
/// nonincreasing `f`, located by bisection to within `1e-9`.
pub fn invert_decreasing(f: impl Fn(f64) -> f64, level: f64, v_hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (SLACK_TOL, 10.0 * v_hi);
    if f(lo) <= level {
        return Ok(lo);
    }
    if f(hi) > level {
        return Err(Error::UnboundedSlack { level });
    }
    while hi - lo > SLACK_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn check_n(n: f64) -> Result<()> {
    if n >= 1.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::param("N", n, "effective sample size must be at least 1"))
    }
}

/// Lower equilibrium slack: the smallest downward shift whose lower-tail
/// envelope falls below `s_lo / s_hi` at effective sample size `n`.
pub fn slack_lower(n: f64, bounds: &Bounds<f64>, env: &TailEnvelope) -> Result<f64> {
    check_n(n)?;
    let level = bounds.s_lo() / bounds.s_hi();
    invert_decreasing(|d| env.zeta(n, d), level, env.v_hi)
}

/// Upper equilibrium slack: the smallest upward radius whose density
/// envelope falls below `c_lo / s_hi` at effective sample size `n`.
pub fn slack_upper(n: f64, bounds: &Bounds<f64>, env: &TailEnvelope) -> Result<f64> {
    check_n(n)?;
    let level = bounds.c_lo / bounds.s_hi();
    invert_decreasing(|d| env.phi(n, d), level, env.v_hi)
}
