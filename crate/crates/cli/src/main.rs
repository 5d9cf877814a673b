use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wilson_index::pipeline::{run, RunConfig};

/// Runs one pipeline described by a TOML config file.
#[derive(Debug, Parser)]
#[command(name = "wilson-index", version, about)]
struct Args {
    /// Path to the run config.
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Print nothing but failures.
    #[arg(short, long)]
    quiet: bool,
}

const THREADS_VAR: &str = "WILSON_INDEX_THREADS";

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("{THREADS_VAR}={raw:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let cfg = match RunConfig::from_file(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = match run(&cfg, &out_dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for check in &report.checks {
        if !check.passed {
            eprintln!("FAIL {} {}: {}", check.field, check.name, check.detail);
        } else if !args.quiet {
            println!("PASS {} {}: {}", check.field, check.name, check.detail);
        }
    }
    if !args.quiet {
        println!("{} pipeline, {} field(s), artifacts in {}", report.pipeline, report.results.len(), out_dir.display());
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
