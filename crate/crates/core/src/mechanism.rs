//! Second-price-per-information auction algebra.
//!
//! Sellers are ranked by score (price per unit of Fisher information). The
//! lowest score wins, is paid the runner-up's score per unit of its own
//! reported information, and the buyer purchases the quantity that is
//! optimal at that unit payment. Verification is not applied here; see
//! [`crate::verification`] and [`crate::simulate::run_with_verification`].

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, MechanismParams, TieBreak};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome<T> {
    pub winner: Option<usize>,
    /// Lowest score, `s_(1)`.
    pub winner_score: T,
    /// Lowest losing score `s_(2)`, or the fallback score for a lone bidder.
    pub second_score: T,
    pub unit_payment: T,
    pub quantity: T,
    /// Set when ex post verification rejected the delivered data.
    pub voided: bool,
}

impl<T: Scalar> AuctionOutcome<T> {
    /// Outcome of an auction nobody entered. Payment fields are NaN.
    pub fn no_winner() -> Self {
        Self {
            winner: None,
            winner_score: T::nan(),
            second_score: T::nan(),
            unit_payment: T::nan(),
            quantity: T::nan(),
            voided: false,
        }
    }

    pub fn has_winner(&self) -> bool {
        self.winner.is_some()
    }

    /// Total transfer to the winner: zero when the contract was voided.
    pub fn transfer(&self) -> T {
        if self.voided || self.winner.is_none() {
            T::zero()
        } else {
            self.unit_payment * self.quantity
        }
    }
}

/// Runs scoring, selection, payment and quantity steps over the opt-in set.
///
/// An empty opt-in set yields [`AuctionOutcome::no_winner`].
pub fn run_second_score<T: Scalar>(actions: &[Action<T>], params: &MechanismParams<T>) -> AuctionOutcome<T> {
    let mut best: Option<(usize, T)> = None;
    let mut second: Option<T> = None;
    for (i, action) in actions.iter().enumerate() {
        let Some(report) = action.report() else {
            continue;
        };
        let s = report.score();
        match best {
            None => best = Some((i, s)),
            Some((_, b)) if beats(s, b, params.tie_break) => {
                second = Some(b);
                best = Some((i, s));
            }
            Some(_) => {
                if second.is_none_or(|s2| s < s2) {
                    second = Some(s);
                }
            }
        }
    }
    let Some((winner, winner_score)) = best else {
        return AuctionOutcome::no_winner();
    };
    let second_score = second.unwrap_or(params.fallback_score);
    let reported = actions[winner].report().map(|r| r.inv_fisher).unwrap_or_else(T::nan);
    AuctionOutcome {
        winner: Some(winner),
        winner_score,
        second_score,
        unit_payment: second_score / reported,
        quantity: mechanism_quantity(params.beta, reported, second_score, params.rho),
        voided: false,
    }
}

// Later indices only displace the incumbent on a strictly lower score.
fn beats<T: Scalar>(challenger: T, incumbent: T, tie: TieBreak) -> bool {
    match tie {
        TieBreak::LowestIndex => challenger < incumbent,
    }
}

/// Quantity bought from a winner reporting `inv_fisher` when the second
/// score is `second_score`.
pub fn mechanism_quantity<T: Scalar>(beta: T, inv_fisher: T, second_score: T, rho: T) -> T {
    if rho == T::one() {
        beta.sqrt() * inv_fisher / second_score.sqrt()
    } else {
        (beta * rho / second_score).powf((rho + T::one()).recip()) * inv_fisher
    }
}

/// Sample size minimising `beta * (V / n)^rho + p * n`.
pub fn optimal_quantity<T: Scalar>(beta: T, inv_fisher: T, unit_price: T, rho: T) -> T {
    if rho == T::one() {
        (beta * inv_fisher / unit_price).sqrt()
    } else {
        (beta * rho * inv_fisher.powf(rho) / unit_price).powf((rho + T::one()).recip())
    }
}

/// Buyer loss `beta * (V / n)^rho + p * n`.
pub fn principal_loss<T: Scalar>(beta: T, true_inv_fisher: T, quantity: T, unit_payment: T, rho: T) -> Result<T> {
    if quantity.partial_cmp(&T::zero()) != Some(Ordering::Greater) {
        return Err(Error::Domain(format!("quantity must be positive, got {quantity}")));
    }
    let error = if rho == T::one() {
        true_inv_fisher / quantity
    } else {
        (true_inv_fisher / quantity).powf(rho)
    };
    Ok(beta * error + unit_payment * quantity)
}

/// Loss from buying optimally at a price-per-information `score`:
/// `2 sqrt(beta s)` for the root-n loss, and
/// `(1 + rho) rho^(-rho/(rho+1)) beta^(1/(rho+1)) s^(rho/(rho+1))` otherwise.
pub fn optimal_loss<T: Scalar>(beta: T, score: T, rho: T) -> T {
    let one = T::one();
    if rho == one {
        (one + one) * (beta * score).sqrt()
    } else {
        let e = rho / (rho + one);
        (one + rho) * rho.powf(-e) * beta.powf((rho + one).recip()) * score.powf(e)
    }
}

/// Excess of `realized_loss` over the first-best root-n loss
/// `2 sqrt(beta s_(1))`, relative to the first-best loss.
pub fn relative_regret<T: Scalar>(realized_loss: T, beta: T, first_best_score: T) -> T {
    let first_best = optimal_loss(beta, first_best_score, T::one());
    (realized_loss - first_best) / first_best
}

/// Net utility of agent `index` with true per-sample cost `cost`:
/// `(p* - c) n*` for a verified winner, `-c n*` for a voided winner, zero otherwise.
pub fn seller_utility<T: Scalar>(outcome: &AuctionOutcome<T>, index: usize, cost: T) -> T {
    if outcome.winner != Some(index) {
        return T::zero();
    }
    if outcome.voided {
        -cost * outcome.quantity
    } else {
        (outcome.unit_payment - cost) * outcome.quantity
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bounds, Report};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bounds() -> Bounds<f64> {
        Bounds::new(0.1, 0.2, 10.0, 20.0).unwrap()
    }

    fn bid(p: f64, v: f64) -> Action<f64> {
        Action::Participate(Report::new(p, v).unwrap())
    }

    #[test]
    fn two_bidder_example() {
        let params = MechanismParams::new(100.0, &bounds()).unwrap();
        let out = run_second_score(&[bid(0.10, 10.0), bid(0.15, 10.0)], &params);
        assert_eq!(out.winner, Some(0));
        assert_relative_eq!(out.winner_score, 1.0, max_relative = 1e-15);
        assert_relative_eq!(out.second_score, 1.5, max_relative = 1e-15);
        assert_relative_eq!(out.unit_payment, 0.15, max_relative = 1e-14);
        assert_relative_eq!(out.quantity, 81.649_658_092_772_6, max_relative = 1e-12);
        assert!(!out.voided);
    }

    #[test]
    fn lone_bidder_uses_fallback() {
        let params = MechanismParams::new(100.0, &bounds()).unwrap();
        let out = run_second_score(&[Action::OptOut, bid(0.12, 12.0), Action::OptOut], &params);
        assert_eq!(out.winner, Some(1));
        assert_eq!(out.second_score, 4.0);
        assert_relative_eq!(out.unit_payment, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(out.quantity, 60.0, max_relative = 1e-15);
    }

    #[test]
    fn sublinear_quantity_example() {
        let params = MechanismParams::new(100.0, &bounds()).unwrap().with_rho(0.5).unwrap();
        let out = run_second_score(&[bid(0.10, 10.0), bid(0.15, 10.0)], &params);
        assert_eq!(out.winner, Some(0));
        // (100 * 0.5 / 1.5)^(2/3) * 10
        let expected = (100.0f64 * 0.5 / 1.5).powf(2.0 / 3.0) * 10.0;
        assert_relative_eq!(out.quantity, expected, max_relative = 1e-12);
        assert!((out.quantity - 103.58).abs() < 0.01);
    }

    #[test]
    fn empty_opt_in_set() {
        let params = MechanismParams::new(100.0, &bounds()).unwrap();
        let out = run_second_score::<f64>(&[Action::OptOut, Action::OptOut], &params);
        assert_eq!(out.winner, None);
        assert!(out.unit_payment.is_nan());
        let out = run_second_score::<f64>(&[], &params);
        assert!(!out.has_winner());
        assert_eq!(out.transfer(), 0.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let params = MechanismParams::new(100.0, &bounds()).unwrap();
        let out = run_second_score(&[bid(0.15, 10.0), bid(0.10, 15.0), bid(0.125, 12.0)], &params);
        assert_eq!(out.winner, Some(0));
        assert_relative_eq!(out.second_score, 1.5);
        let out = run_second_score(&[Action::OptOut, bid(0.10, 15.0), bid(0.15, 10.0)], &params);
        assert_eq!(out.winner, Some(1));
    }

    #[test]
    fn optimal_quantity_examples() {
        assert_relative_eq!(optimal_quantity(100.0, 10.0, 0.15, 1.0), (1000.0f64 / 0.15).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(optimal_quantity(100.0, 10.0, 0.15, 1.0), 81.650, epsilon = 1e-3);
        assert_eq!(optimal_quantity(1.0, 1.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn optimal_quantity_matches_brute_force_scan() {
        let (beta, v, p, rho) = (100.0, 10.0, 0.15, 0.5);
        let loss = |n: f64| beta * (v / n).powf(rho) + p * n;
        let best = (1..=50_000)
            .map(|k| f64::from(k) * 0.01)
            .min_by(|a, b| loss(*a).total_cmp(&loss(*b)))
            .unwrap();
        let n = optimal_quantity(beta, v, p, rho);
        assert!((n - best).abs() <= 0.01, "closed form {n} vs scan {best}");
    }

    #[test]
    fn principal_loss_examples() {
        let n = (1000.0f64 / 0.15).sqrt();
        let loss = principal_loss(100.0, 10.0, n, 0.15, 1.0).unwrap();
        assert_relative_eq!(loss, 2.0 * (150.0f64).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(loss, 24.495, epsilon = 1e-3);
        assert_eq!(principal_loss(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 2.0);
        assert!(principal_loss(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(principal_loss(1.0, 1.0, -3.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn misreported_quality_loss() {
        // winner truly V = 10 but reports 12; runner-up score 1.5
        let params = MechanismParams::new(100.0, &bounds()).unwrap();
        let out = run_second_score(&[bid(0.10, 12.0), bid(0.15, 10.0)], &params);
        let loss = principal_loss(100.0, 10.0, out.quantity, out.unit_payment, 1.0).unwrap();
        let expected = (1.0 + 10.0 / 12.0) * (150.0f64).sqrt();
        assert_relative_eq!(loss, expected, max_relative = 1e-12);
        assert_relative_eq!(loss, 22.454, epsilon = 1e-3);
    }

    #[test]
    fn relative_regret_examples() {
        let beta = 100.0;
        let realized = 2.0 * (beta * 1.5f64).sqrt();
        assert_relative_eq!(relative_regret(realized, beta, 1.0), 1.5f64.sqrt() - 1.0, max_relative = 1e-12);
        assert_relative_eq!(relative_regret(realized, beta, 1.0), 0.2247, epsilon = 1e-4);
        assert_eq!(relative_regret(20.0, beta, 1.0), 0.0);
        let realized = (1.0 + 10.0 / 12.0) * (150.0f64).sqrt();
        assert_relative_eq!(relative_regret(realized, beta, 1.0), 0.1227, epsilon = 1e-4);
    }

    #[test]
    fn seller_utility_branches() {
        let params = MechanismParams::new(100.0, &bounds()).unwrap();
        let mut out = run_second_score(&[bid(0.10, 10.0), bid(0.15, 10.0)], &params);
        assert_relative_eq!(seller_utility(&out, 0, 0.10), 0.05 * out.quantity, max_relative = 1e-12);
        assert_eq!(seller_utility(&out, 1, 0.15), 0.0);
        out.voided = true;
        assert_relative_eq!(seller_utility(&out, 0, 0.10), -0.10 * out.quantity);
        assert_eq!(out.transfer(), 0.0);
    }

    // Exhaustive check against every rival profile on a coarse grid.
    #[test]
    fn truthful_price_is_dominant_on_coarse_rival_grid() {
        let b = bounds();
        let params = MechanismParams::new(100.0, &b).unwrap();
        let qualities = [12.0, 17.0, 10.5];
        let coarse: Vec<f64> = (0..6).map(|k| 0.1 + 0.02 * f64::from(k)).collect();
        let deviations: Vec<f64> = (0..200).map(|k| 0.1 + 0.1 * f64::from(k) / 199.0).collect();
        for &cost in &[0.11, 0.137, 0.19] {
            for &p1 in &coarse {
                for &p2 in &coarse {
                    let utility = |p: f64| {
                        let actions = [bid(p, qualities[0]), bid(p1, qualities[1]), bid(p2, qualities[2])];
                        seller_utility(&run_second_score(&actions, &params), 0, cost)
                    };
                    let truthful = utility(cost);
                    for &p in &deviations {
                        assert!(truthful >= utility(p) - 1e-12, "cost {cost} rivals ({p1},{p2}) deviation {p}");
                    }
                }
            }
        }
    }

    #[test]
    fn f32_instantiation_agrees_with_f64() {
        let b32 = Bounds::new(0.1f32, 0.2, 10.0, 20.0).unwrap();
        let params = MechanismParams::new(100.0f32, &b32).unwrap();
        let actions = [
            Action::Participate(Report::new(0.10f32, 10.0).unwrap()),
            Action::Participate(Report::new(0.15f32, 10.0).unwrap()),
        ];
        let out = run_second_score(&actions, &params);
        assert_eq!(out.winner, Some(0));
        assert!((out.quantity - 81.649_66).abs() < 1e-3);
    }

    fn arb_actions() -> impl Strategy<Value = Vec<(f64, f64, bool)>> {
        prop::collection::vec((0.1f64..=0.2, 10.0f64..=20.0, prop::bool::weighted(0.85)), 1..8)
    }

    proptest! {
        #[test]
        fn payment_and_quantity_identities(profile in arb_actions(), beta in 1.0f64..2000.0) {
            let params = MechanismParams::new(beta, &bounds()).unwrap();
            let actions: Vec<_> = profile
                .iter()
                .map(|&(p, v, enter)| if enter { bid(p, v) } else { Action::OptOut })
                .collect();
            let out = run_second_score(&actions, &params);
            let Some(w) = out.winner else {
                prop_assert!(profile.iter().all(|x| !x.2));
                return Ok(());
            };
            let v = actions[w].report().unwrap().inv_fisher;
            prop_assert!(out.winner_score <= out.second_score);
            prop_assert!((out.unit_payment * v - out.second_score).abs() <= 1e-12 * out.second_score);
            let expected_n = beta.sqrt() * v / out.second_score.sqrt();
            prop_assert!((out.quantity - expected_n).abs() <= 1e-12 * expected_n);
            prop_assert!(out.quantity >= crate::model::n_lower_bound(beta, &bounds()) * (1.0 - 1e-12));
            // truthful-report loss identity
            let loss = principal_loss(beta, v, out.quantity, out.unit_payment, 1.0).unwrap();
            let target = 2.0 * (beta * out.second_score).sqrt();
            prop_assert!(((loss - target) / target).abs() <= 1e-10);
        }

        #[test]
        fn outcome_ignores_winner_price_while_winning(profile in arb_actions(), shrink in 0.5f64..1.0) {
            let params = MechanismParams::new(100.0, &bounds()).unwrap();
            let actions: Vec<_> = profile.iter().map(|&(p, v, _)| bid(p, v)).collect();
            let out = run_second_score(&actions, &params);
            let w = out.winner.unwrap();
            let mut moved = actions.clone();
            let r = *actions[w].report().unwrap();
            moved[w] = bid(r.price * shrink, r.inv_fisher);
            let out2 = run_second_score(&moved, &params);
            prop_assert_eq!(out2.winner, Some(w));
            prop_assert_eq!(out2.second_score, out.second_score);
            prop_assert_eq!(out2.unit_payment, out.unit_payment);
            prop_assert_eq!(out2.quantity, out.quantity);
        }

        #[test]
        fn winner_invariant_to_common_price_rescaling(profile in arb_actions(), k in 0.1f64..10.0) {
            let params = MechanismParams::new(100.0, &bounds()).unwrap();
            let actions: Vec<_> = profile.iter().map(|&(p, v, _)| bid(p, v)).collect();
            let scaled: Vec<_> = profile.iter().map(|&(p, v, _)| bid(p * k, v)).collect();
            let a = run_second_score(&actions, &params).winner;
            let b = run_second_score(&scaled, &params).winner;
            // rescaling can only flip exact or near-exact ties
            let scores: Vec<f64> = profile.iter().map(|x| x.0 * x.1).collect();
            let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let near_tie = scores.iter().filter(|&&s| (s - min).abs() <= 1e-12 * min).count() > 1;
            prop_assert!(a == b || near_tie);
        }

        #[test]
        fn sublinear_loss_closed_form(s2 in 0.5f64..5.0, beta in 1.0f64..5000.0, rho in 0.05f64..0.999, v in 10.0f64..20.0) {
            let n = mechanism_quantity(beta, v, s2, rho);
            let loss = principal_loss(beta, v, n, s2 / v, rho).unwrap();
            let e = rho / (rho + 1.0);
            let closed = beta.powf(1.0 / (rho + 1.0)) * s2.powf(e) * rho.powf(-e) * (1.0 + rho);
            prop_assert!(((loss - closed) / closed).abs() <= 1e-10);
            prop_assert!(((optimal_loss(beta, s2, rho) - closed) / closed).abs() <= 1e-12);
            // quantity is the optimum at the paid price
            let opt = optimal_quantity(beta, v, s2 / v, rho);
            prop_assert!(((opt - n) / n).abs() <= 1e-10);
        }
    }
}
