//! Agent types, type-space bounds, priors, reports and mechanism parameters.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// A seller's private type: per-sample cost and inverse Fisher information
/// (the per-sample variance in the Gaussian location model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentType<T> {
    pub cost: T,
    pub inv_fisher: T,
}

impl<T: Scalar> AgentType<T> {
    pub fn new(cost: T, inv_fisher: T) -> Result<Self> {
        positive("cost", cost)?;
        positive("inv_fisher", inv_fisher)?;
        Ok(Self { cost, inv_fisher })
    }

    /// Score the seller would submit by reporting its type truthfully.
    pub fn true_score(&self) -> T {
        self.cost * self.inv_fisher
    }

    pub fn truthful_report(&self) -> Report<T> {
        Report {
            price: self.cost,
            inv_fisher: self.inv_fisher,
        }
    }
}

/// Compact type space `[c_lo, c_hi] x [v_lo, v_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds<T> {
    pub c_lo: T,
    pub c_hi: T,
    pub v_lo: T,
    pub v_hi: T,
}

impl<T: Scalar> Bounds<T> {
    pub fn new(c_lo: T, c_hi: T, v_lo: T, v_hi: T) -> Result<Self> {
        positive("c_lo", c_lo)?;
        positive("v_lo", v_lo)?;
        finite("c_hi", c_hi)?;
        finite("v_hi", v_hi)?;
        if c_lo.partial_cmp(&c_hi) != Some(Ordering::Less) {
            return Err(Error::param("c_hi", c_hi.to_f64_lossy(), "must exceed c_lo"));
        }
        if v_lo.partial_cmp(&v_hi) != Some(Ordering::Less) {
            return Err(Error::param("v_hi", v_hi.to_f64_lossy(), "must exceed v_lo"));
        }
        Ok(Self {
            c_lo,
            c_hi,
            v_lo,
            v_hi,
        })
    }

    /// Smallest attainable score `c_lo * v_lo`.
    pub fn s_lo(&self) -> T {
        self.c_lo * self.v_lo
    }

    /// Largest attainable score `c_hi * v_hi`.
    pub fn s_hi(&self) -> T {
        self.c_hi * self.v_hi
    }

    pub fn contains_type(&self, t: &AgentType<T>) -> bool {
        self.contains(t.cost, t.inv_fisher)
    }

    pub fn contains_report(&self, r: &Report<T>) -> bool {
        self.contains(r.price, r.inv_fisher)
    }

    pub fn check_report(&self, r: &Report<T>) -> Result<()> {
        if self.contains_report(r) {
            Ok(())
        } else {
            Err(Error::ReportOutOfBounds {
                price: r.price.to_f64_lossy(),
                inv_fisher: r.inv_fisher.to_f64_lossy(),
            })
        }
    }

    fn contains(&self, c: T, v: T) -> bool {
        c >= self.c_lo && c <= self.c_hi && v >= self.v_lo && v <= self.v_hi
    }
}

/// Closed interval carrying a uniform law. `lo == hi` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformInterval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> UniformInterval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        finite("lo", lo)?;
        finite("hi", hi)?;
        if hi < lo {
            return Err(Error::param("hi", hi.to_f64_lossy(), "must not be below lo"));
        }
        Ok(Self { lo, hi })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u: f64 = rng.random();
        self.lo + (self.hi - self.lo) * T::lit(u)
    }

    pub fn cdf(&self, x: T) -> T {
        if x < self.lo {
            T::zero()
        } else if x >= self.hi {
            T::one()
        } else {
            (x - self.lo) / (self.hi - self.lo)
        }
    }
}

/// Independent uniform prior over costs and inverse Fisher informations,
/// drawn i.i.d. across agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior<T> {
    pub cost: UniformInterval<T>,
    pub inv_fisher: UniformInterval<T>,
}

impl<T: Scalar> Prior<T> {
    pub fn new(bounds: &Bounds<T>, cost: UniformInterval<T>, inv_fisher: UniformInterval<T>) -> Result<Self> {
        if cost.lo < bounds.c_lo || cost.hi > bounds.c_hi {
            return Err(Error::param("prior.cost", cost.lo.to_f64_lossy(), "interval leaves the cost bounds"));
        }
        if inv_fisher.lo < bounds.v_lo || inv_fisher.hi > bounds.v_hi {
            return Err(Error::param(
                "prior.inv_fisher",
                inv_fisher.lo.to_f64_lossy(),
                "interval leaves the quality bounds",
            ));
        }
        Ok(Self { cost, inv_fisher })
    }

    /// Uniform prior over the whole bounding rectangle.
    pub fn full(bounds: &Bounds<T>) -> Self {
        Self {
            cost: UniformInterval {
                lo: bounds.c_lo,
                hi: bounds.c_hi,
            },
            inv_fisher: UniformInterval {
                lo: bounds.v_lo,
                hi: bounds.v_hi,
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentType<T> {
        let cost = self.cost.sample(rng);
        let inv_fisher = self.inv_fisher.sample(rng);
        AgentType { cost, inv_fisher }
    }
}

/// A participation report: per-sample price bid and reported inverse
/// Fisher information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub price: T,
    pub inv_fisher: T,
}

impl<T: Scalar> Report<T> {
    pub fn new(price: T, inv_fisher: T) -> Result<Self> {
        positive("price", price)?;
        positive("inv_fisher", inv_fisher)?;
        Ok(Self { price, inv_fisher })
    }

    /// Price per unit of Fisher information, `price * inv_fisher`.
    pub fn score(&self) -> T {
        self.price * self.inv_fisher
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action<T> {
    OptOut,
    Participate(Report<T>),
}

impl<T: Scalar> Action<T> {
    pub fn report(&self) -> Option<&Report<T>> {
        match self {
            Action::OptOut => None,
            Action::Participate(r) => Some(r),
        }
    }
}

impl<T> From<Report<T>> for Action<T> {
    fn from(r: Report<T>) -> Self {
        Action::Participate(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams<T> {
    pub beta: T,
    /// Exponent of the error term; `1` is the root-n loss.
    pub rho: T,
    /// Second score used when only one seller participates.
    pub fallback_score: T,
    pub tie_break: TieBreak,
}

impl<T: Scalar> MechanismParams<T> {
    /// Root-n loss with the fallback score at the top of the score range.
    pub fn new(beta: T, bounds: &Bounds<T>) -> Result<Self> {
        positive("beta", beta)?;
        Ok(Self {
            beta,
            rho: T::one(),
            fallback_score: bounds.s_hi(),
            tie_break: TieBreak::LowestIndex,
        })
    }

    pub fn with_rho(mut self, rho: T) -> Result<Self> {
        if !(rho > T::zero() && rho <= T::one()) {
            return Err(Error::param("rho", rho.to_f64_lossy(), "must lie in (0, 1]"));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn with_fallback_score(mut self, score: T, bounds: &Bounds<T>) -> Result<Self> {
        finite("fallback_score", score)?;
        if score < bounds.s_hi() {
            return Err(Error::param(
                "fallback_score",
                score.to_f64_lossy(),
                "must be at least c_hi * v_hi",
            ));
        }
        self.fallback_score = score;
        Ok(self)
    }

    pub fn is_root_n(&self) -> bool {
        self.rho == T::one()
    }
}

/// Mechanism score of a report: price times reported inverse Fisher information.
pub fn score<T: Scalar>(report: &Report<T>) -> T {
    report.score()
}

/// Draws `m` independent types from `prior` on the given stream.
pub fn sample_types<T: Scalar>(prior: &Prior<T>, m: usize, stream: &RngStream) -> Result<Vec<AgentType<T>>> {
    if m == 0 {
        return Err(Error::EmptyPopulation);
    }
    let mut rng = stream.rng();
    Ok((0..m).map(|_| prior.sample(&mut rng)).collect())
}

/// Deterministic lower bound `sqrt(beta) * v_lo / sqrt(c_hi * v_hi)` on the
/// quantity purchased by the root-n mechanism for any feasible reports.
pub fn n_lower_bound<T: Scalar>(beta: T, bounds: &Bounds<T>) -> T {
    beta.sqrt() * bounds.v_lo / bounds.s_hi().sqrt()
}

fn positive<T: Scalar>(name: &'static str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, x.to_f64_lossy(), "must be positive and finite"))
    }
}

fn finite<T: Scalar>(name: &'static str, x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, x.to_f64_lossy(), "must be finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_bounds() -> Bounds<f64> {
        Bounds::new(0.1, 0.2, 10.0, 20.0).unwrap()
    }

    #[test]
    fn score_examples() {
        assert_relative_eq!(score(&Report::new(0.12, 12.0).unwrap()), 1.44, max_relative = 1e-15);
        assert_eq!(score(&Report::new(1.0, 1.0).unwrap()), 1.0);
        assert_relative_eq!(score(&Report::new(0.15, 10.0).unwrap()), 1.5, max_relative = 1e-15);
    }

    #[test]
    fn score_works_in_f32() {
        let r = Report::new(0.15f32, 10.0f32).unwrap();
        assert!((score(&r) - 1.5).abs() < 1e-6);
    }

    #[test]
    fn reports_reject_nonpositive_fields() {
        assert!(Report::new(0.0, 1.0).is_err());
        assert!(Report::new(1.0, -2.0).is_err());
        assert!(Report::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(0.2, 0.1, 10.0, 20.0).is_err());
        assert!(Bounds::new(0.1, 0.2, 10.0, 10.0).is_err());
        assert!(Bounds::new(0.0, 0.2, 10.0, 20.0).is_err());
        let b = paper_bounds();
        assert_relative_eq!(b.s_lo(), 1.0);
        assert_relative_eq!(b.s_hi(), 4.0);
    }

    #[test]
    fn n_lower_bound_matches_reported_sizes() {
        let b = paper_bounds();
        assert_relative_eq!(n_lower_bound(10.0, &b), 15.811_388_300_841_896, max_relative = 1e-12);
        assert_relative_eq!(n_lower_bound(100.0, &b), 50.0, max_relative = 1e-12);
        assert_relative_eq!(n_lower_bound(1000.0, &b), 158.113_883_008_418_97, max_relative = 1e-12);
    }

    #[test]
    fn sample_types_stays_in_prior_rectangle() {
        let b = paper_bounds();
        let prior = Prior::full(&b);
        let types = sample_types(&prior, 10, &RngStream::new(3)).unwrap();
        assert_eq!(types.len(), 10);
        assert!(types.iter().all(|t| b.contains_type(t)));
    }

    #[test]
    fn sample_types_point_mass() {
        let b = paper_bounds();
        let prior = Prior::new(
            &b,
            UniformInterval::new(0.1, 0.1).unwrap(),
            UniformInterval::new(10.0, 10.0).unwrap(),
        )
        .unwrap();
        let types = sample_types(&prior, 3, &RngStream::new(0)).unwrap();
        assert_eq!(types, vec![AgentType { cost: 0.1, inv_fisher: 10.0 }; 3]);
    }

    #[test]
    fn sample_types_is_deterministic() {
        let prior = Prior::full(&paper_bounds());
        let s = RngStream::new(11).named("types");
        assert_eq!(sample_types(&prior, 25, &s).unwrap(), sample_types(&prior, 25, &s).unwrap());
        assert_ne!(
            sample_types(&prior, 25, &s).unwrap(),
            sample_types(&prior, 25, &s.index(1)).unwrap()
        );
    }

    #[test]
    fn sample_types_rejects_empty_population() {
        let prior = Prior::full(&paper_bounds());
        assert_eq!(sample_types(&prior, 0, &RngStream::new(0)), Err(Error::EmptyPopulation));
    }

    #[test]
    fn prior_must_sit_inside_bounds() {
        let b = paper_bounds();
        let wide = UniformInterval::new(0.05, 0.2).unwrap();
        assert!(Prior::new(&b, wide, UniformInterval::new(10.0, 20.0).unwrap()).is_err());
    }

    #[test]
    fn mechanism_params_validation() {
        let b = paper_bounds();
        let p = MechanismParams::new(100.0, &b).unwrap();
        assert_eq!(p.fallback_score, 4.0);
        assert!(p.with_rho(0.0).is_err());
        assert!(p.with_rho(1.5).is_err());
        assert!(p.with_rho(0.5).is_ok());
        assert!(p.with_fallback_score(3.9, &b).is_err());
        assert!(MechanismParams::new(-1.0, &b).is_err());
    }
}
