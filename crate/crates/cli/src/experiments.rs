//! One runner per experiment kind. Each returns a result table with a fixed
//! header and the panels of its optional plot.
//!
//! Random streams are keyed by the experiment kind and by stable labels
//! (the bit pattern of `beta`, the population size, the sample size), so a
//! row does not change when unrelated grid entries are added or removed.

use infoprocure_core::simulate::{
    best_response_curve, empirical_failure_prob, kappa, participation_map, IncentiveModel, UniformScores,
};
use infoprocure_core::{
    n_lower_bound, optimal_loss, principal_loss, sample_types, simulate, slack_lower,
    slack_upper, Action, AgentType, Error, RngStream, TailEnvelope,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, Resolved};
use crate::plot::{HeatPanel, LinePanel, Panel, Series};
use crate::table::{Cell, Table};

pub const AUCTION_HEADER: &[&str] = &[
    "rule",
    "beta",
    "instance",
    "winner",
    "winner_cost",
    "winner_inv_fisher",
    "winner_score",
    "second_score",
    "unit_payment",
    "quantity",
    "samples",
    "passed",
    "winner_utility",
    "principal_loss",
    "first_best_loss",
    "relative_regret",
    "regret_bound",
];
pub const BEST_RESPONSE_HEADER: &[&str] =
    &["rule", "beta", "true_variance", "reported_variance", "utility_mean", "utility_se"];
pub const PARTICIPATION_HEADER: &[&str] = &[
    "rule",
    "beta",
    "cost",
    "true_variance",
    "best_report",
    "utility_mean",
    "utility_se",
    "participates",
];
pub const KAPPA_HEADER: &[&str] = &["m", "s", "kappa_hat", "se"];
pub const FAILURE_HEADER: &[&str] = &["rule", "true_variance", "reported_variance", "n", "reps", "failure_prob"];
pub const SLACK_HEADER: &[&str] = &["beta", "N", "slack_lower", "slack_upper"];

pub fn header(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Auction => AUCTION_HEADER,
        ExperimentKind::BestResponse => BEST_RESPONSE_HEADER,
        ExperimentKind::ParticipationMap => PARTICIPATION_HEADER,
        ExperimentKind::KappaCurve => KAPPA_HEADER,
        ExperimentKind::FailureProb => FAILURE_HEADER,
        ExperimentKind::SlackBounds => SLACK_HEADER,
    }
}

#[derive(Debug, Clone)]
pub struct Output {
    pub table: Table,
    pub panels: Vec<Panel>,
    pub plot_columns: usize,
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, res: &Resolved) -> Result<Output, Error> {
    let root = RngStream::new(cfg.seed).named(kind.name());
    match kind {
        ExperimentKind::Auction => auction(cfg, res, &root),
        ExperimentKind::BestResponse => best_response(cfg, res, &root),
        ExperimentKind::ParticipationMap => participation(cfg, res, &root),
        ExperimentKind::KappaCurve => kappa_curve(cfg, &root),
        ExperimentKind::FailureProb => failure(cfg, res, &root),
        ExperimentKind::SlackBounds => slack(cfg, res),
    }
}

fn grid(g: &crate::config::Grid) -> Vec<f64> {
    g.values().expect("validated grid")
}

fn beta_stream(root: &RngStream, beta: f64) -> RngStream {
    root.named("beta").index(beta.to_bits())
}

struct AuctionRow {
    instance: usize,
    winner: usize,
    winner_type: AgentType<f64>,
    outcome: infoprocure_core::AuctionOutcome<f64>,
    samples: usize,
    winner_utility: f64,
    loss: f64,
    first_best: f64,
}

fn auction(cfg: &ExperimentConfig, res: &Resolved, root: &RngStream) -> Result<Output, Error> {
    let m = cfg.simulation.agents;
    let mut table = Table::new(AUCTION_HEADER);
    let mut panels = Vec::new();
    for rule in &res.rules {
        for &beta in &res.betas {
            let params = res.params(beta);
            let rows: Vec<AuctionRow> = (0..cfg.auction.instances)
                .into_par_iter()
                .map(|i| -> Result<AuctionRow, Error> {
                    let inst = root.named("instance").index(i as u64);
                    let types = sample_types(&res.prior, m, &inst.named("types"))?;
                    let actions: Vec<Action<f64>> = types.iter().map(|t| t.truthful_report().into()).collect();
                    let data = beta_stream(&inst, beta).named("data");
                    let v = simulate::run_with_verification(&actions, &types, &params, rule, &data)?;
                    let o = v.outcome;
                    let w = o.winner.expect("truthful sellers always participate");
                    let t = types[w];
                    let paid = if o.voided { 0.0 } else { o.unit_payment };
                    let loss = principal_loss(beta, t.inv_fisher, o.quantity, paid, res.rho)?;
                    Ok(AuctionRow {
                        instance: i,
                        winner: w,
                        winner_type: t,
                        outcome: o,
                        samples: v.samples_drawn,
                        winner_utility: v.utilities[w],
                        loss,
                        first_best: optimal_loss(beta, t.true_score(), res.rho),
                    })
                })
                .collect::<Result<_, _>>()?;
            let mut regrets = Vec::with_capacity(rows.len());
            let mut bounds = Vec::with_capacity(rows.len());
            for r in &rows {
                let o = &r.outcome;
                let t = r.winner_type;
                let regret = (r.loss - r.first_best) / r.first_best;
                let bound = (o.second_score / o.winner_score).sqrt() - 1.0;
                regrets.push(regret);
                bounds.push(bound);
                table.push(vec![
                    rule.label().into(),
                    beta.into(),
                    r.instance.into(),
                    r.winner.into(),
                    t.cost.into(),
                    t.inv_fisher.into(),
                    o.winner_score.into(),
                    o.second_score.into(),
                    o.unit_payment.into(),
                    o.quantity.into(),
                    r.samples.into(),
                    (!o.voided).into(),
                    r.winner_utility.into(),
                    r.loss.into(),
                    r.first_best.into(),
                    regret.into(),
                    bound.into(),
                ]);
            }
            regrets.sort_by(f64::total_cmp);
            bounds.sort_by(f64::total_cmp);
            let k = regrets.len() as f64;
            let quantile = |v: &[f64]| v.iter().enumerate().map(|(i, &x)| ((i as f64 + 0.5) / k, x)).collect();
            panels.push(Panel::Line(LinePanel {
                title: format!("{}, beta = {beta}", rule.label()),
                x_label: "quantile".into(),
                y_label: "relative regret".into(),
                series: vec![
                    Series::new("realized", quantile(&regrets)),
                    Series::new("sqrt(s2/s1) - 1", quantile(&bounds)).dashed(),
                ],
            }));
        }
    }
    Ok(Output {
        table,
        panels,
        plot_columns: res.betas.len(),
    })
}

fn incentive_model(cfg: &ExperimentConfig, res: &Resolved, beta: f64, rule: infoprocure_core::VerificationRule) -> Result<IncentiveModel, Error> {
    IncentiveModel::new(res.prior, cfg.simulation.agents, res.params(beta), rule, cfg.simulation.reps)
}

fn best_response(cfg: &ExperimentConfig, res: &Resolved, root: &RngStream) -> Result<Output, Error> {
    let br = &cfg.best_response;
    let truths = grid(&br.true_variances);
    let reports = grid(&br.reports);
    let mut table = Table::new(BEST_RESPONSE_HEADER);
    let mut panels = Vec::new();
    for &rule in &res.rules {
        for &beta in &res.betas {
            let model = incentive_model(cfg, res, beta, rule)?;
            let stream = beta_stream(root, beta);
            let mut series = Vec::new();
            for &truth in &truths {
                let focal = AgentType::new(br.cost, truth)?;
                let curve = best_response_curve(&focal, &reports, &model, &stream)?;
                for (&v, u) in curve.report_grid.iter().zip(&curve.utilities) {
                    table.push(vec![
                        rule.label().into(),
                        beta.into(),
                        truth.into(),
                        v.into(),
                        u.mean.into(),
                        u.std_error.into(),
                    ]);
                }
                series.push(Series::new(
                    format!("true {truth}, argmax {}", curve.argmax_report),
                    curve.report_grid.iter().zip(&curve.utilities).map(|(&v, u)| (v, u.mean)).collect(),
                ));
            }
            panels.push(Panel::Line(LinePanel {
                title: format!("{}, beta = {beta}", rule.label()),
                x_label: "reported variance".into(),
                y_label: "expected utility".into(),
                series,
            }));
        }
    }
    Ok(Output {
        table,
        panels,
        plot_columns: res.betas.len(),
    })
}

fn participation(cfg: &ExperimentConfig, res: &Resolved, root: &RngStream) -> Result<Output, Error> {
    let p = &cfg.participation;
    let costs = grid(&p.costs);
    let variances = grid(&p.variances);
    let reports = grid(&p.reports);
    let types = variances
        .iter()
        .flat_map(|&v| costs.iter().map(move |&c| AgentType::new(c, v)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(PARTICIPATION_HEADER);
    let mut panels = Vec::new();
    for &rule in &res.rules {
        for &beta in &res.betas {
            let model = incentive_model(cfg, res, beta, rule)?;
            let cells = participation_map(&types, &reports, &model, &beta_stream(root, beta))?;
            for c in &cells {
                table.push(vec![
                    rule.label().into(),
                    beta.into(),
                    c.agent_type.cost.into(),
                    c.agent_type.inv_fisher.into(),
                    c.best_report.into(),
                    c.optimal_report_utility.mean.into(),
                    c.optimal_report_utility.std_error.into(),
                    c.participates.into(),
                ]);
            }
            let joining = cells.iter().filter(|c| c.participates).count();
            panels.push(Panel::Heat(HeatPanel {
                title: format!("{}, beta = {beta}: {joining}/{} opt in", rule.label(), cells.len()),
                x_label: "cost".into(),
                y_label: "true variance".into(),
                xs: costs.clone(),
                ys: variances.clone(),
                values: cells.iter().map(|c| c.optimal_report_utility.mean).collect(),
            }));
        }
    }
    Ok(Output {
        table,
        panels,
        plot_columns: res.betas.len().max(res.rules.len()),
    })
}

fn kappa_curve(cfg: &ExperimentConfig, root: &RngStream) -> Result<Output, Error> {
    let k = &cfg.kappa;
    let prior = UniformScores::new(k.score_prior[0], k.score_prior[1])?;
    let scores = grid(&k.scores);
    let mut table = Table::new(KAPPA_HEADER);
    let mut series = Vec::new();
    for &m in &k.agents {
        let stream = root.named("m").index(m as u64);
        let mut pts = Vec::with_capacity(scores.len());
        for &s in &scores {
            let est = kappa(s, &prior, m, k.reps, &stream)?;
            table.push(vec![m.into(), s.into(), est.value.into(), est.std_error.into()]);
            pts.push((s, est.value));
        }
        series.push(Series::new(format!("m = {m}"), pts));
    }
    let threshold = 1.0 - cfg.verification.alpha - k.epsilon;
    let (lo, hi) = (scores[0], scores[scores.len() - 1]);
    series.push(Series::new(format!("opt-in threshold {threshold}"), vec![(lo, threshold), (hi, threshold)]).dashed());
    Ok(Output {
        table,
        panels: vec![Panel::Line(LinePanel {
            title: "conditional payment ratio".into(),
            x_label: "score s".into(),
            y_label: "kappa(s)".into(),
            series,
        })],
        plot_columns: 1,
    })
}

fn failure(cfg: &ExperimentConfig, res: &Resolved, root: &RngStream) -> Result<Output, Error> {
    let f = &cfg.failure;
    let reported = grid(&f.reported_variances);
    let reps = cfg.simulation.reps;
    let mut table = Table::new(FAILURE_HEADER);
    let mut series = Vec::new();
    for rule in &res.rules {
        for &v in &reported {
            let mut pts = Vec::new();
            for &n in &f.sample_sizes {
                let stream = root.named("n").index(n as u64);
                let prob = empirical_failure_prob(f.true_variance, v, n, rule, reps, &stream)?;
                table.push(vec![
                    rule.label().into(),
                    f.true_variance.into(),
                    v.into(),
                    n.into(),
                    reps.into(),
                    prob.into(),
                ]);
                pts.push((n as f64, prob));
            }
            series.push(Series::new(format!("{}, report {v}", rule.label()), pts));
        }
    }
    Ok(Output {
        table,
        panels: vec![Panel::Line(LinePanel {
            title: format!("failure frequency, true variance {}", f.true_variance),
            x_label: "sample size n".into(),
            y_label: "P(fail)".into(),
            series,
        })],
        plot_columns: 1,
    })
}

fn slack(cfg: &ExperimentConfig, res: &Resolved) -> Result<Output, Error> {
    let s = &cfg.slack;
    let env = TailEnvelope::gaussian(res.bounds.v_hi).with_constants(s.c1, s.c2, s.c3, s.c4)?;
    let unbounded_as_blank = |r: Result<f64, Error>| match r {
        Ok(x) => Ok(Cell::Num(x)),
        Err(Error::UnboundedSlack { .. }) => Ok(Cell::Empty),
        Err(e) => Err(e),
    };
    let mut table = Table::new(SLACK_HEADER);
    let (mut lower, mut upper) = (Vec::new(), Vec::new());
    for beta in grid(&s.beta) {
        let n = n_lower_bound(beta, &res.bounds);
        let lo = unbounded_as_blank(slack_lower(n, &res.bounds, &env))?;
        let hi = unbounded_as_blank(slack_upper(n, &res.bounds, &env))?;
        if let Some(x) = lo.as_f64() {
            lower.push((beta.log10(), x));
        }
        if let Some(x) = hi.as_f64() {
            upper.push((beta.log10(), x));
        }
        table.push(vec![beta.into(), n.into(), lo, hi]);
    }
    Ok(Output {
        table,
        panels: vec![Panel::Line(LinePanel {
            title: "verification slack at N(beta)".into(),
            x_label: "log10 beta".into(),
            y_label: "slack".into(),
            series: vec![Series::new("lower", lower), Series::new("upper", upper)],
        })],
        plot_columns: 1,
    })
}
