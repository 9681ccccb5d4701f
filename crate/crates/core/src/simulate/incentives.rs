//! Interim utilities, best-response curves and participation maps for a
//! focal seller facing truthful, always-participating rivals.
//!
//! All queries of one call share common random numbers: replication `r`
//! fixes the rivals' types and one standard normal data stream `z`. A
//! winner with true variance `V` delivers `sqrt(V) z`, and both test
//! statistics scale linearly in `V`, so the prefix moments of `z` are
//! computed once per replication and reused by every (type, report) query.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::pipeline::{sample_count, ReplicationStreams};
use super::{blocked, UtilityEstimate, Welford};
use crate::error::{Error, Result};
use crate::mechanism::mechanism_quantity;
use crate::model::{sample_types, AgentType, MechanismParams, Prior, Report};
use crate::rng::RngStream;
use crate::verification::{lcb_from_moments, normal_quantile, MomentAccumulator, VerificationRule};

/// Environment for incentive experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncentiveModel {
    pub prior: Prior<f64>,
    /// Population size including the focal seller.
    pub agents: usize,
    pub params: MechanismParams<f64>,
    pub rule: VerificationRule,
    pub reps: usize,
}

impl IncentiveModel {
    pub fn new(
        prior: Prior<f64>,
        agents: usize,
        params: MechanismParams<f64>,
        rule: VerificationRule,
        reps: usize,
    ) -> Result<Self> {
        if agents < 2 {
            return Err(Error::param("agents", agents as f64, "need the focal seller and at least one rival"));
        }
        if reps == 0 {
            return Err(Error::param("reps", 0.0, "need at least one replication"));
        }
        Ok(Self {
            prior,
            agents,
            params,
            rule,
            reps,
        })
    }

    pub fn with_rule(mut self, rule: VerificationRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Query {
    cost: f64,
    true_inv_fisher: f64,
    report: Report<f64>,
}

/// Prefix moments of one replication's standard normal stream, extended on
/// demand.
struct NormalPrefix<'a> {
    stream: &'a RngStream,
    rng: Option<ChaCha8Rng>,
    acc: MomentAccumulator<f64>,
    // (variance, fourth central moment) of the first k draws, at index k
    moments: Vec<(f64, f64)>,
}

impl<'a> NormalPrefix<'a> {
    fn new(stream: &'a RngStream) -> Self {
        Self {
            stream,
            rng: None,
            acc: MomentAccumulator::new(),
            moments: vec![(f64::NAN, f64::NAN); 2],
        }
    }

    fn at(&mut self, count: usize) -> (f64, f64) {
        let rng = self.rng.get_or_insert_with(|| self.stream.rng());
        while self.acc.len() < count {
            let z: f64 = rng.sample(StandardNormal);
            self.acc.push(z);
            if self.acc.len() >= 2 {
                let m = self.acc.moments().expect("two or more draws");
                self.moments.push((m.variance, m.fourth));
            }
        }
        self.moments[count]
    }
}

struct Evaluator<'a> {
    model: &'a IncentiveModel,
    z: f64,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a IncentiveModel) -> Result<Self> {
        let z = match model.rule {
            VerificationRule::Lcb { alpha } => normal_quantile(1.0 - alpha)?,
            _ => f64::NAN,
        };
        Ok(Self { model, z })
    }

    fn passes(&self, q: &Query, quantity: f64, data: &mut NormalPrefix<'_>) -> bool {
        let reported = q.report.inv_fisher;
        match self.model.rule {
            VerificationRule::ExactOracle => q.true_inv_fisher <= reported,
            VerificationRule::SampleVariance => {
                let (var, _) = data.at(sample_count(quantity));
                q.true_inv_fisher * var <= reported
            }
            VerificationRule::Lcb { .. } => {
                let n = sample_count(quantity);
                let (var, fourth) = data.at(n);
                q.true_inv_fisher * lcb_from_moments(var, fourth, n, self.z) <= reported
            }
        }
    }

    fn run(&self, queries: &[Query], root: &RngStream) -> Vec<UtilityEstimate> {
        let m = self.model;
        let params: &MechanismParams<f64> = &m.params;
        let block = |range: std::ops::Range<usize>| {
            let mut acc = vec![Welford::default(); queries.len()];
            for r in range {
                let streams = ReplicationStreams::new(root, r);
                let rivals = sample_types(&m.prior, m.agents - 1, &streams.rivals).expect("agents >= 2");
                let rival_min = rivals.iter().map(AgentType::true_score).fold(f64::INFINITY, f64::min);
                let mut data = NormalPrefix::new(&streams.data);
                for (q, a) in queries.iter().zip(acc.iter_mut()) {
                    a.push(self.utility(q, rival_min, params, &mut data));
                }
            }
            acc
        };
        let merged = blocked(
            m.reps,
            block,
            |acc: &mut Vec<Welford>, part| acc.iter_mut().zip(&part).for_each(|(a, p)| a.merge(p)),
            vec![Welford::default(); queries.len()],
        );
        merged.iter().map(Welford::estimate).collect()
    }

    // Focal seller is agent 0 and so wins ties.
    fn utility(&self, q: &Query, rival_min: f64, params: &MechanismParams<f64>, data: &mut NormalPrefix<'_>) -> f64 {
        if q.report.score() > rival_min {
            return 0.0;
        }
        let payment = rival_min / q.report.inv_fisher;
        let quantity = mechanism_quantity(params.beta, q.report.inv_fisher, rival_min, params.rho);
        if self.passes(q, quantity, data) {
            (payment - q.cost) * quantity
        } else {
            -q.cost * quantity
        }
    }
}

/// Interim expected utility of a focal seller of type `focal` submitting
/// `report` while the other `agents - 1` sellers, drawn from the prior,
/// report truthfully.
pub fn interim_utility(
    focal: &AgentType<f64>,
    report: &Report<f64>,
    model: &IncentiveModel,
    stream: &RngStream,
) -> Result<UtilityEstimate> {
    let q = Query {
        cost: focal.cost,
        true_inv_fisher: focal.inv_fisher,
        report: *report,
    };
    Ok(Evaluator::new(model)?.run(&[q], stream)[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseCurve {
    pub report_grid: Vec<f64>,
    pub utilities: Vec<UtilityEstimate>,
    /// Report with the largest mean utility; ties go to the smallest report.
    pub argmax_report: f64,
}

impl BestResponseCurve {
    fn from_estimates(report_grid: Vec<f64>, utilities: Vec<UtilityEstimate>) -> Self {
        let best = argmax(&utilities);
        Self {
            argmax_report: report_grid[best],
            report_grid,
            utilities,
        }
    }

    pub fn best(&self) -> &UtilityEstimate {
        let i = argmax(&self.utilities);
        &self.utilities[i]
    }
}

fn argmax(utilities: &[UtilityEstimate]) -> usize {
    let mut best = 0;
    for (i, u) in utilities.iter().enumerate().skip(1) {
        if u.mean > utilities[best].mean {
            best = i;
        }
    }
    best
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("report grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less)) {
        return Err(Error::Domain("report grid must be strictly increasing".into()));
    }
    Ok(())
}

fn curve_queries(focal: &AgentType<f64>, grid: &[f64]) -> Result<Vec<Query>> {
    grid.iter()
        .map(|&v| {
            Ok(Query {
                cost: focal.cost,
                true_inv_fisher: focal.inv_fisher,
                report: Report::new(focal.cost, v)?,
            })
        })
        .collect()
}

/// Interim utility of every reported inverse Fisher information on
/// `report_grid`, with the price held at the focal seller's true cost.
pub fn best_response_curve(
    focal: &AgentType<f64>,
    report_grid: &[f64],
    model: &IncentiveModel,
    stream: &RngStream,
) -> Result<BestResponseCurve> {
    check_grid(report_grid)?;
    let queries = curve_queries(focal, report_grid)?;
    let utilities = Evaluator::new(model)?.run(&queries, stream);
    Ok(BestResponseCurve::from_estimates(report_grid.to_vec(), utilities))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationCell {
    pub agent_type: AgentType<f64>,
    pub best_report: f64,
    pub optimal_report_utility: UtilityEstimate,
    /// Opting in beats the zero outside option.
    pub participates: bool,
}

/// Best-response utility of every type on `type_grid`, compared to opting out.
pub fn participation_map(
    type_grid: &[AgentType<f64>],
    report_grid: &[f64],
    model: &IncentiveModel,
    stream: &RngStream,
) -> Result<Vec<ParticipationCell>> {
    check_grid(report_grid)?;
    let mut queries = Vec::with_capacity(type_grid.len() * report_grid.len());
    for t in type_grid {
        queries.extend(curve_queries(t, report_grid)?);
    }
    let estimates = Evaluator::new(model)?.run(&queries, stream);
    Ok(type_grid
        .iter()
        .zip(estimates.chunks(report_grid.len()))
        .map(|(t, chunk)| {
            let curve = BestResponseCurve::from_estimates(report_grid.to_vec(), chunk.to_vec());
            let best = *curve.best();
            ParticipationCell {
                agent_type: *t,
                best_report: curve.argmax_report,
                optimal_report_utility: best,
                participates: best.mean > 0.0,
            }
        })
        .collect())
}

/// Expected utility of winning against a fixed lowest rival score
/// `rival_min` with pass probability `pass_prob`:
/// `q sqrt(beta s) - sqrt(beta) c V~ / sqrt(s)`.
pub fn winning_utility(pass_prob: f64, rival_min: f64, beta: f64, cost: f64, reported_inv_fisher: f64) -> f64 {
    pass_prob * (beta * rival_min).sqrt() - beta.sqrt() * cost * reported_inv_fisher / rival_min.sqrt()
}
