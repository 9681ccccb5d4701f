use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use infoprocure_cli::{run_experiment, ExperimentKind, RunRequest, OUT_DIR_ENV, PRESETS};

#[derive(Debug, Parser)]
#[command(name = "infoprocure", version, about = "Run data-procurement auction experiments")]
#[command(after_help = format!(
    "Presets: {}\nThe output directory defaults to ${OUT_DIR_ENV}, else ./results.",
    PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
))]
struct Args {
    /// Experiment to run.
    kind: ExperimentKind,
    /// TOML config; its keys override the preset's.
    #[arg(long, required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset used as the base config.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long)]
    plot: bool,
    /// Worker threads (default: one per core).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Replace existing output files.
    #[arg(long)]
    overwrite: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let req = RunRequest {
        kind: args.kind,
        config: args.config,
        preset: args.preset,
        out: args.out,
        plot: args.plot,
        threads: args.threads.map(usize::from),
        overwrite: args.overwrite,
    };
    match run_experiment(&req) {
        Ok(a) => {
            println!("{}", a.table.display());
            println!("{}", a.manifest.display());
            if let Some(p) = a.plot {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
