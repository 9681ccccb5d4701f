//! Experiment configuration: a TOML file with one section per concern.
//! Every field has a default reproducing the reference numerical study, so
//! a config only needs to state what it changes.

use std::cmp::Ordering;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use infoprocure_core::{Bounds, MechanismParams, Prior, UniformInterval, VerificationRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Auction,
    BestResponse,
    ParticipationMap,
    KappaCurve,
    FailureProb,
    SlackBounds,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Auction => "auction",
            Self::BestResponse => "best-response",
            Self::ParticipationMap => "participation-map",
            Self::KappaCurve => "kappa-curve",
            Self::FailureProb => "failure-prob",
            Self::SlackBounds => "slack-bounds",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Either an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Grid::Range { start, stop, step }
    }

    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            Grid::List(v) => {
                if v.is_empty() {
                    return Err("grid is empty".into());
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err("grid values must be finite".into());
                }
                Ok(v.clone())
            }
            &Grid::Range { start, stop, step } => {
                if !(step > 0.0 && start.is_finite() && stop.is_finite()) {
                    return Err("range needs finite start/stop and a positive step".into());
                }
                if stop < start {
                    return Err("range stop lies below start".into());
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                if count > 100_000 {
                    return Err(format!("range expands to {count} points"));
                }
                Ok((0..count).map(|k| start + step * k as f64).collect())
            }
        }
    }

    fn increasing(&self) -> Result<Vec<f64>, String> {
        let v = self.values()?;
        if v.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less)) {
            return Err("grid must be strictly increasing".into());
        }
        Ok(v)
    }
}

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Lcb,
    SampleVariance,
    ExactOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub c_lo: f64,
    pub c_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            c_lo: 0.1,
            c_hi: 0.2,
            v_lo: 10.0,
            v_hi: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub cost: [f64; 2],
    pub inv_fisher: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanismSection {
    pub beta: OneOrMany,
    pub rho: f64,
    pub fallback_score: Option<f64>,
}

impl Default for MechanismSection {
    fn default() -> Self {
        Self {
            beta: OneOrMany::One(1000.0),
            rho: 1.0,
            fallback_score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationSection {
    pub rules: Vec<RuleName>,
    pub alpha: f64,
}

impl Default for VerificationSection {
    fn default() -> Self {
        Self {
            rules: vec![RuleName::Lcb, RuleName::SampleVariance],
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub agents: usize,
    pub reps: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { agents: 10, reps: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuctionSection {
    pub instances: usize,
}

impl Default for AuctionSection {
    fn default() -> Self {
        Self { instances: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BestResponseSection {
    pub cost: f64,
    pub true_variances: Grid,
    pub reports: Grid,
}

impl Default for BestResponseSection {
    fn default() -> Self {
        Self {
            cost: 0.12,
            true_variances: Grid::List(vec![10.0, 11.0, 12.0, 13.0, 14.0]),
            reports: Grid::range(10.0, 16.0, 0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticipationSection {
    pub costs: Grid,
    pub variances: Grid,
    pub reports: Grid,
}

impl Default for ParticipationSection {
    fn default() -> Self {
        Self {
            costs: Grid::range(0.11, 0.19, 0.01),
            variances: Grid::range(10.0, 20.0, 1.0),
            reports: Grid::range(10.0, 20.0, 0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KappaSection {
    pub agents: Vec<usize>,
    pub scores: Grid,
    pub score_prior: [f64; 2],
    pub reps: usize,
    pub epsilon: f64,
}

impl Default for KappaSection {
    fn default() -> Self {
        Self {
            agents: vec![10, 100],
            scores: Grid::range(0.05, 0.8, 0.05),
            score_prior: [0.0, 1.0],
            reps: 20_000,
            epsilon: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FailureSection {
    pub true_variance: f64,
    pub reported_variances: Grid,
    pub sample_sizes: Vec<usize>,
}

impl Default for FailureSection {
    fn default() -> Self {
        Self {
            true_variance: 10.0,
            reported_variances: Grid::List(vec![10.0]),
            sample_sizes: vec![50, 158, 200, 500],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlackSection {
    pub beta: Grid,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for SlackSection {
    fn default() -> Self {
        Self {
            beta: Grid::List(vec![1e2, 1e3, 1e4, 1e5, 1e6]),
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub bounds: BoundsSection,
    pub prior: Option<PriorSection>,
    #[serde(default)]
    pub mechanism: MechanismSection,
    #[serde(default)]
    pub verification: VerificationSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub auction: AuctionSection,
    #[serde(default)]
    pub best_response: BestResponseSection,
    #[serde(default)]
    pub participation: ParticipationSection,
    #[serde(default)]
    pub kappa: KappaSection,
    #[serde(default)]
    pub failure: FailureSection,
    #[serde(default)]
    pub slack: SlackSection,
}

fn default_seed() -> u64 {
    20_240_601
}

/// One validation failure, addressed by dotted key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

/// Validated, ready-to-run view of a config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub bounds: Bounds<f64>,
    pub prior: Prior<f64>,
    pub betas: Vec<f64>,
    pub rho: f64,
    pub fallback_score: f64,
    pub rules: Vec<VerificationRule>,
}

impl Resolved {
    pub fn params(&self, beta: f64) -> MechanismParams<f64> {
        MechanismParams {
            beta,
            rho: self.rho,
            fallback_score: self.fallback_score,
            tie_break: Default::default(),
        }
    }
}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(ConfigIssue {
            key: key.to_owned(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, key: &str, message: &str) {
        if !ok {
            self.push(key, message);
        }
    }

    fn grid(&mut self, key: &str, grid: &Grid) -> Vec<f64> {
        grid.increasing().unwrap_or_else(|e| {
            self.push(key, e);
            Vec::new()
        })
    }
}

impl ExperimentConfig {
    pub fn rule(&self, name: RuleName) -> VerificationRule {
        match name {
            RuleName::Lcb => VerificationRule::Lcb {
                alpha: self.verification.alpha,
            },
            RuleName::SampleVariance => VerificationRule::SampleVariance,
            RuleName::ExactOracle => VerificationRule::ExactOracle,
        }
    }

    /// Checks every field the experiment `kind` will read.
    pub fn validate(&self, kind: ExperimentKind) -> Result<Resolved, Vec<ConfigIssue>> {
        let mut is = Issues(Vec::new());
        if let Some(k) = self.kind {
            is.check(k == kind, "kind", &format!("config is for `{k}` but `{kind}` was requested"));
        }

        let b = &self.bounds;
        let bounds = Bounds::new(b.c_lo, b.c_hi, b.v_lo, b.v_hi);
        if let Err(e) = &bounds {
            let key = match e {
                infoprocure_core::Error::InvalidParameter { name, .. } => format!("bounds.{name}"),
                _ => "bounds".into(),
            };
            is.push(&key, e.to_string());
        }
        let bounds = bounds.unwrap_or(Bounds {
            c_lo: 0.1,
            c_hi: 0.2,
            v_lo: 10.0,
            v_hi: 20.0,
        });

        let prior = match &self.prior {
            None => Prior::full(&bounds),
            Some(p) => {
                let cost = UniformInterval::new(p.cost[0], p.cost[1]);
                let inv = UniformInterval::new(p.inv_fisher[0], p.inv_fisher[1]);
                match (cost, inv) {
                    (Ok(c), Ok(v)) => Prior::new(&bounds, c, v).unwrap_or_else(|e| {
                        is.push("prior", e.to_string());
                        Prior::full(&bounds)
                    }),
                    _ => {
                        is.push("prior", "intervals must be finite with lo <= hi");
                        Prior::full(&bounds)
                    }
                }
            }
        };

        let betas = self.mechanism.beta.values();
        is.check(!betas.is_empty(), "mechanism.beta", "need at least one value");
        is.check(
            betas.iter().all(|&x| x > 0.0 && x.is_finite()),
            "mechanism.beta",
            "must be positive and finite",
        );
        let rho = self.mechanism.rho;
        is.check(rho > 0.0 && rho <= 1.0, "mechanism.rho", "must lie in (0, 1]");
        let fallback_score = self.mechanism.fallback_score.unwrap_or(bounds.s_hi());
        is.check(
            fallback_score >= bounds.s_hi() && fallback_score.is_finite(),
            "mechanism.fallback_score",
            "must be finite and at least c_hi * v_hi",
        );

        let alpha = self.verification.alpha;
        is.check(alpha > 0.0 && alpha < 1.0, "verification.alpha", "must lie strictly inside (0, 1)");
        let needs_rules = !matches!(kind, ExperimentKind::KappaCurve | ExperimentKind::SlackBounds);
        if needs_rules {
            is.check(!self.verification.rules.is_empty(), "verification.rules", "need at least one rule");
        }
        let rules = self.verification.rules.iter().map(|&r| self.rule(r)).collect();

        let sim = &self.simulation;
        match kind {
            ExperimentKind::Auction => {
                is.check(sim.agents >= 1, "simulation.agents", "need at least one agent");
                is.check(self.auction.instances >= 1, "auction.instances", "need at least one instance");
            }
            ExperimentKind::BestResponse | ExperimentKind::ParticipationMap => {
                is.check(sim.agents >= 2, "simulation.agents", "need the focal seller and a rival");
                is.check(sim.reps >= 1, "simulation.reps", "need at least one replication");
            }
            ExperimentKind::FailureProb => {
                is.check(sim.reps >= 1, "simulation.reps", "need at least one replication");
            }
            _ => {}
        }

        match kind {
            ExperimentKind::BestResponse => {
                let br = &self.best_response;
                is.check(
                    br.cost >= bounds.c_lo && br.cost <= bounds.c_hi,
                    "best_response.cost",
                    "must lie within [c_lo, c_hi]",
                );
                let tv = is.grid("best_response.true_variances", &br.true_variances);
                is.check(
                    tv.iter().all(|&v| v >= bounds.v_lo && v <= bounds.v_hi),
                    "best_response.true_variances",
                    "must lie within [v_lo, v_hi]",
                );
                let reports = is.grid("best_response.reports", &br.reports);
                is.check(
                    reports.iter().all(|&v| v >= bounds.v_lo && v <= bounds.v_hi),
                    "best_response.reports",
                    "must lie within [v_lo, v_hi]",
                );
            }
            ExperimentKind::ParticipationMap => {
                let p = &self.participation;
                let costs = is.grid("participation.costs", &p.costs);
                is.check(
                    costs.iter().all(|&c| c >= bounds.c_lo && c <= bounds.c_hi + 1e-12),
                    "participation.costs",
                    "must lie within [c_lo, c_hi]",
                );
                for (key, grid) in [("participation.variances", &p.variances), ("participation.reports", &p.reports)] {
                    let v = is.grid(key, grid);
                    is.check(
                        v.iter().all(|&x| x >= bounds.v_lo && x <= bounds.v_hi + 1e-9),
                        key,
                        "must lie within [v_lo, v_hi]",
                    );
                }
            }
            ExperimentKind::KappaCurve => {
                let k = &self.kappa;
                is.check(!k.agents.is_empty() && k.agents.iter().all(|&m| m >= 2), "kappa.agents", "each m must be >= 2");
                let [lo, hi] = k.score_prior;
                is.check(lo >= 0.0 && lo < hi && hi.is_finite(), "kappa.score_prior", "need 0 <= lo < hi");
                let scores = is.grid("kappa.scores", &k.scores);
                is.check(
                    scores.iter().all(|&s| s >= 0.0 && s < hi),
                    "kappa.scores",
                    "scores must lie in [0, upper end of the score prior)",
                );
                is.check(k.reps >= 2, "kappa.reps", "need at least two replications");
                is.check(k.epsilon >= 0.0, "kappa.epsilon", "must be nonnegative");
            }
            ExperimentKind::FailureProb => {
                let f = &self.failure;
                is.check(f.true_variance > 0.0 && f.true_variance.is_finite(), "failure.true_variance", "must be positive");
                let r = is.grid("failure.reported_variances", &f.reported_variances);
                is.check(r.iter().all(|&x| x > 0.0), "failure.reported_variances", "must be positive");
                is.check(
                    !f.sample_sizes.is_empty() && f.sample_sizes.iter().all(|&n| n >= 2),
                    "failure.sample_sizes",
                    "each sample size must be >= 2",
                );
            }
            ExperimentKind::SlackBounds => {
                let s = &self.slack;
                let betas = is.grid("slack.beta", &s.beta);
                is.check(betas.iter().all(|&b| b > 0.0), "slack.beta", "must be positive");
                for (key, c) in [("slack.c1", s.c1), ("slack.c2", s.c2), ("slack.c3", s.c3), ("slack.c4", s.c4)] {
                    is.check(c > 0.0 && c.is_finite(), key, "envelope constants must be positive");
                }
            }
            ExperimentKind::Auction => {}
        }

        if is.0.is_empty() {
            Ok(Resolved {
                bounds,
                prior,
                betas,
                rho,
                fallback_score,
                rules,
            })
        } else {
            Err(is.0)
        }
    }
}

/// 1-based line of `key` (dotted `section.field` or a top-level field) in a
/// TOML source, following `[section]` headers and inline tables.
pub fn locate_key(source: &str, key: &str) -> Option<usize> {
    let (section, field) = match key.rsplit_once('.') {
        Some((s, f)) => (Some(s), f),
        None => (None, key),
    };
    let mut current: Option<String> = None;
    let mut section_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') && !line.starts_with("[[") {
            let name = line.trim_start_matches('[').split(']').next().unwrap_or("").trim().to_owned();
            if Some(name.as_str()) == section {
                section_line = Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let lhs = lhs.trim();
        let here = current.as_deref();
        if here == section && lhs == field {
            return Some(i + 1);
        }
        // dotted keys, e.g. `participation.costs = ...` at top level
        if here.is_none() && section.is_some_and(|s| lhs == format!("{s}.{field}")) {
            return Some(i + 1);
        }
    }
    section_line
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> ExperimentConfig {
        toml::from_str(src).unwrap()
    }

    #[test]
    fn defaults_reproduce_reference_study() {
        let c = parse("");
        let r = c.validate(ExperimentKind::BestResponse).unwrap();
        assert_eq!(r.bounds.s_hi(), 4.0);
        assert_eq!(r.fallback_score, 4.0);
        assert_eq!(c.best_response.reports.values().unwrap().len(), 25);
        assert_eq!(c.participation.costs.values().unwrap().len(), 9);
        assert_eq!(c.participation.variances.values().unwrap().len(), 11);
    }

    #[test]
    fn range_grid_is_inclusive_and_exact() {
        let v = Grid::range(10.0, 16.0, 0.25).values().unwrap();
        assert_eq!(v.first(), Some(&10.0));
        assert_eq!(v.last(), Some(&16.0));
        let c = Grid::range(0.11, 0.19, 0.01).values().unwrap();
        assert_eq!(c.len(), 9);
        assert!((c[8] - 0.19).abs() < 1e-12);
        assert!(Grid::range(1.0, 0.0, 0.1).values().is_err());
        assert!(Grid::List(vec![]).values().is_err());
    }

    #[test]
    fn scalar_or_list_beta() {
        assert_eq!(parse("[mechanism]\nbeta = 10").mechanism.beta.values(), vec![10.0]);
        assert_eq!(parse("[mechanism]\nbeta = [10, 100]").mechanism.beta.values(), vec![10.0, 100.0]);
    }

    #[test]
    fn validation_collects_every_issue() {
        let c = parse("[mechanism]\nbeta = -1\nrho = 2\n[verification]\nalpha = 1.5\n");
        let issues = c.validate(ExperimentKind::BestResponse).unwrap_err();
        let keys: Vec<_> = issues.iter().map(|i| i.key.as_str()).collect();
        assert_eq!(keys, vec!["mechanism.beta", "mechanism.rho", "verification.alpha"]);
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let c = parse("kind = \"kappa-curve\"");
        let issues = c.validate(ExperimentKind::SlackBounds).unwrap_err();
        assert_eq!(issues[0].key, "kind");
    }

    #[test]
    fn bad_bounds_and_grids() {
        let c = parse("[bounds]\nc_lo = 0.3\nc_hi = 0.2\nv_lo = 10\nv_hi = 20\n");
        let issues = c.validate(ExperimentKind::SlackBounds).unwrap_err();
        assert_eq!(issues[0].key, "bounds.c_hi");
        let c = parse("[best_response]\nreports = [12, 11]\n");
        assert_eq!(c.validate(ExperimentKind::BestResponse).unwrap_err()[0].key, "best_response.reports");
        let c = parse("[best_response]\nreports = { start = 5, stop = 16, step = 0.5 }\n");
        assert!(c.validate(ExperimentKind::BestResponse).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[mechanism]\nbeat = 3\n").is_err());
    }

    #[test]
    fn locates_keys() {
        let src = "seed = 3\n\n[mechanism]\nrho = 2\nbeta = 4\n[verification]\nalpha = 3\n";
        assert_eq!(locate_key(src, "seed"), Some(1));
        assert_eq!(locate_key(src, "mechanism.beta"), Some(5));
        assert_eq!(locate_key(src, "verification.alpha"), Some(7));
        assert_eq!(locate_key(src, "verification.rules"), Some(6));
        assert_eq!(locate_key(src, "kappa.reps"), None);
        assert_eq!(locate_key("kappa.reps = 1\n", "kappa.reps"), Some(1));
    }
}
