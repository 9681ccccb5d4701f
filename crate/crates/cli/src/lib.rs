//! Configuration-driven experiment runner.
//!
//! A run merges an optional shipped preset with an optional user config
//! (user keys win), validates every field the experiment reads, computes a
//! result table and writes `<stem>.csv`, `<stem>.manifest.json` and, on
//! request, `<stem>.svg` into the output directory.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod table;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind};
pub use experiments::Output;
pub use table::Table;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "INFOPROCURE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

/// Shipped presets: name and TOML source.
pub const PRESETS: &[(&str, &str)] = &[
    ("auction", include_str!("../presets/auction.toml")),
    ("calibration", include_str!("../presets/calibration.toml")),
    ("figure1", include_str!("../presets/figure1.toml")),
    ("figure1-smoke", include_str!("../presets/figure1-smoke.toml")),
    ("figure2", include_str!("../presets/figure2.toml")),
    ("figureA1", include_str!("../presets/figureA1.toml")),
    ("slack", include_str!("../presets/slack.toml")),
];

fn preset_names() -> String {
    PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
}

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

/// Config text plus a display name used in error messages.
#[derive(Debug, Clone)]
pub struct Source {
    pub name: String,
    pub text: String,
}

/// A problem tied to a position in a config source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Located {
    pub source: String,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for Located {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        write!(f, ": ")?;
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        write!(f, "{}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("unknown preset `{0}`; available: {list}", list = preset_names())]
    UnknownPreset(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|l| format!("  {l}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Located>),
    #[error("refusing to overwrite existing {}; pass --overwrite to replace it", .0.display())]
    Collision(PathBuf),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Compute(#[from] infoprocure_core::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl RunError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::UnknownPreset(_) | RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn toml_line(text: &str, err: &toml::de::Error) -> Option<usize> {
    err.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
}

fn parse_table(src: &Source) -> Result<toml::Table, Located> {
    let located = |e: toml::de::Error| Located {
        source: src.name.clone(),
        line: toml_line(&src.text, &e),
        key: None,
        message: e.message().trim().to_owned(),
    };
    // A typed pass first, so unknown keys and type errors keep their spans.
    toml::from_str::<ExperimentConfig>(&src.text).map_err(located)?;
    toml::from_str::<toml::Table>(&src.text).map_err(located)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parsed and validated inputs of one run.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub resolved: config::Resolved,
    pub sources: Vec<String>,
}

/// Merges `sources` in order (later wins) and validates for `kind`.
pub fn load(kind: ExperimentKind, sources: &[Source]) -> Result<Loaded, RunError> {
    let mut merged = toml::Table::new();
    let mut errors = Vec::new();
    for src in sources {
        match parse_table(src) {
            Ok(t) => merge(&mut merged, t),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(RunError::Config(errors));
    }
    let config: ExperimentConfig = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| {
        RunError::Config(vec![Located {
            source: sources.last().map_or("<defaults>".into(), |s| s.name.clone()),
            line: None,
            key: None,
            message: e.message().trim().to_owned(),
        }])
    })?;
    let resolved = config.validate(kind).map_err(|issues| {
        RunError::Config(
            issues
                .into_iter()
                .map(|i| {
                    let hit = sources
                        .iter()
                        .rev()
                        .find_map(|s| config::locate_key(&s.text, &i.key).map(|line| (s.name.clone(), line)));
                    let (source, line) = match hit {
                        Some((s, l)) => (s, Some(l)),
                        None => ("<defaults>".to_owned(), None),
                    };
                    Located {
                        source,
                        line,
                        key: Some(i.key),
                        message: i.message,
                    }
                })
                .collect(),
        )
    })?;
    Ok(Loaded {
        kind,
        config,
        resolved,
        sources: sources.iter().map(|s| s.name.clone()).collect(),
    })
}

/// Runs the experiment on a pool of `threads` workers (`None`: rayon's
/// default).
pub fn compute(loaded: &Loaded, threads: Option<usize>) -> Result<Output, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    Ok(pool.install(|| experiments::run(loaded.kind, &loaded.config, &loaded.resolved))?)
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub kind: ExperimentKind,
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub plot: bool,
    pub threads: Option<usize>,
    pub overwrite: bool,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    kind: ExperimentKind,
    seed: u64,
    sources: &'a [String],
    threads: Option<usize>,
    wall_time_seconds: f64,
    table: String,
    columns: &'static [&'static str],
    rows: usize,
    plot: Option<String>,
    config: &'a ExperimentConfig,
}

/// Paths written by a run.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub table: PathBuf,
    pub manifest: PathBuf,
    pub plot: Option<PathBuf>,
}

fn output_dir(req: &RunRequest, cfg: &ExperimentConfig) -> PathBuf {
    req.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn stem(req: &RunRequest) -> String {
    req.config
        .as_deref()
        .and_then(Path::file_stem)
        .map(|s| s.to_string_lossy().into_owned())
        .or_else(|| req.preset.clone())
        .unwrap_or_else(|| req.kind.name().to_owned())
}

/// Reads the preset and config named in `req`.
pub fn sources(req: &RunRequest) -> Result<Vec<Source>, RunError> {
    let mut out = Vec::new();
    if let Some(name) = &req.preset {
        let text = preset(name).ok_or_else(|| RunError::UnknownPreset(name.clone()))?;
        out.push(Source {
            name: format!("preset:{name}"),
            text: text.to_owned(),
        });
    }
    if let Some(path) = &req.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            RunError::Config(vec![Located {
                source: path.display().to_string(),
                line: None,
                key: None,
                message: e.to_string(),
            }])
        })?;
        out.push(Source {
            name: path.display().to_string(),
            text,
        });
    }
    Ok(out)
}

/// Full run: load, check for collisions, compute, write artifacts.
pub fn run_experiment(req: &RunRequest) -> Result<Artifacts, RunError> {
    let loaded = load(req.kind, &sources(req)?)?;
    let dir = output_dir(req, &loaded.config);
    let stem = stem(req);
    let artifacts = Artifacts {
        table: dir.join(format!("{stem}.csv")),
        manifest: dir.join(format!("{stem}.manifest.json")),
        plot: req.plot.then(|| dir.join(format!("{stem}.svg"))),
    };
    if !req.overwrite {
        let targets = [Some(&artifacts.table), Some(&artifacts.manifest), artifacts.plot.as_ref()];
        if let Some(p) = targets.into_iter().flatten().find(|p| p.exists()) {
            return Err(RunError::Collision(p.clone()));
        }
    }

    let start = Instant::now();
    let output = compute(&loaded, req.threads)?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&dir)?;
    std::fs::write(&artifacts.table, output.table.to_csv())?;
    if let Some(p) = &artifacts.plot {
        std::fs::write(p, plot::render(&output.panels, output.plot_columns))?;
    }
    let file_name = |p: &Path| p.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        kind: req.kind,
        seed: loaded.config.seed,
        sources: &loaded.sources,
        threads: req.threads,
        wall_time_seconds: wall,
        table: file_name(&artifacts.table),
        columns: output.table.header,
        rows: output.table.rows.len(),
        plot: artifacts.plot.as_deref().map(file_name),
        config: &loaded.config,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    std::fs::write(&artifacts.manifest, json)?;
    Ok(artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(name: &str, text: &str) -> Source {
        Source {
            name: name.into(),
            text: text.into(),
        }
    }

    #[test]
    fn every_preset_parses_and_validates() {
        for (name, text) in PRESETS {
            let cfg: ExperimentConfig = toml::from_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let kind = cfg.kind.unwrap_or_else(|| panic!("{name} names no kind"));
            load(kind, &[src(name, text)]).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn later_sources_override_nested_keys() {
        let a = src("a", "seed = 1\n[simulation]\nagents = 4\nreps = 10\n");
        let b = src("b", "[simulation]\nreps = 20\n");
        let l = load(ExperimentKind::BestResponse, &[a, b]).unwrap();
        assert_eq!(l.config.seed, 1);
        assert_eq!(l.config.simulation.agents, 4);
        assert_eq!(l.config.simulation.reps, 20);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let err = load(ExperimentKind::SlackBounds, &[src("c.toml", "seed = 1\n\n[slack\nc1 = 2\n")]).unwrap_err();
        let RunError::Config(v) = err else { panic!() };
        assert_eq!(v[0].line, Some(3));
        let err = load(ExperimentKind::SlackBounds, &[src("c.toml", "seed = 1\n[slack]\nc9 = 2\n")]).unwrap_err();
        let RunError::Config(v) = err else { panic!() };
        assert_eq!(v[0].line, Some(3), "{}", v[0]);
        let err = load(ExperimentKind::SlackBounds, &[src("c.toml", "[slack]\nc1 = \"x\"\n")]).unwrap_err();
        let RunError::Config(v) = err else { panic!() };
        assert_eq!(v[0].line, Some(2), "{}", v[0]);
    }

    #[test]
    fn validation_errors_point_at_the_offending_source() {
        let base = src("preset:p", "[slack]\nc1 = 1\n");
        let user = src("user.toml", "seed = 2\n[slack]\nc2 = -1\n");
        let err = load(ExperimentKind::SlackBounds, &[base, user]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let RunError::Config(v) = err else { panic!() };
        assert_eq!(v[0].to_string(), "user.toml:3: slack.c2: envelope constants must be positive");
    }
}
