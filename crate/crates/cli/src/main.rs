//! `relclock`: validate and run experiment configuration documents.
//!
//! Exit status: 0 when every enabled verdict passes, 1 when a verdict fails or an experiment
//! errors, 2 for unreadable or invalid configuration.

mod document;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use relclock::experiments::{run_experiment, Scenario};

use output::{ExperimentSummary, Manifest, Status};

#[derive(Parser)]
#[command(name = "relclock", version, about = "Relational-clock experiments from declarative configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration document and list every problem found.
    Validate { config: PathBuf },
    /// Run every enabled experiment of a document.
    Run {
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for sweep points.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the seed of every experiment.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the available scenarios.
    ListScenarios,
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn validate(config: &Path) -> Result<ExitCode> {
    let loaded = document::load(config)?;
    if loaded.diagnostics.is_empty() {
        println!("{}: {} experiment(s), no problems found", config.display(), loaded.experiments.len());
        return Ok(ExitCode::SUCCESS);
    }
    for d in &loaded.diagnostics {
        println!("{d}");
    }
    Ok(ExitCode::from(EXIT_CONFIG))
}

fn run(config: &Path, out: &Path, jobs: Option<usize>, seed: Option<u64>) -> Result<ExitCode> {
    let start = Instant::now();
    let loaded = document::load(config)?;
    if !loaded.diagnostics.is_empty() {
        for d in &loaded.diagnostics {
            eprintln!("{d}");
        }
        return Ok(ExitCode::from(EXIT_CONFIG));
    }
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("cannot size the worker pool")?;
    }
    let mut experiments = loaded.experiments;
    if let Some(s) = seed {
        for e in &mut experiments {
            e.seed = s;
        }
    }
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;

    let mut summaries = Vec::with_capacity(experiments.len());
    for cfg in &experiments {
        if !cfg.enabled {
            println!("[{}] skipped", cfg.name);
            summaries.push(ExperimentSummary::without_report(cfg, Status::Skipped, None));
            continue;
        }
        let t = Instant::now();
        let summary = match run_experiment(cfg) {
            Ok(report) => {
                output::write_csv(&output::csv_path(out, &cfg.name), &report)?;
                let s = ExperimentSummary::from_report(cfg, report);
                let failed: Vec<&str> = s.verdicts.iter().filter(|v| !v.passed).map(|v| v.name.as_str()).collect();
                println!(
                    "[{}] {} verdicts, {} failed ({:.1}s){}",
                    cfg.name,
                    s.verdicts.len(),
                    failed.len(),
                    t.elapsed().as_secs_f64(),
                    if failed.is_empty() { String::new() } else { format!(": {}", failed.join(", ")) }
                );
                for w in &s.warnings {
                    println!("[{}] warning: {w}", cfg.name);
                }
                s
            }
            Err(e) => {
                println!("[{}] error: {e}", cfg.name);
                ExperimentSummary::without_report(cfg, Status::Error, Some(e.to_string()))
            }
        };
        summaries.push(summary);
        // Rewritten after every experiment so a later failure keeps earlier results.
        output::write_summary(out, &summaries)?;
    }
    output::write_summary(out, &summaries)?;
    let manifest = Manifest {
        config_path: config.display().to_string(),
        config_hash: output::config_hash(&experiments),
        resolved_config: &experiments,
        output_dir: out.display().to_string(),
        version: output::VERSION,
        runtime_seconds: start.elapsed().as_secs_f64(),
        verdicts: output::verdict_table(&summaries),
    };
    output::write_manifest(out, &manifest)?;
    let ok = summaries.iter().all(|s| s.ok());
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILED) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { config } => validate(config),
        Command::Run { config, out, jobs, seed } => run(config, out, *jobs, *seed),
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<26}{}", s.name(), s.description());
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_CONFIG)
    })
}
