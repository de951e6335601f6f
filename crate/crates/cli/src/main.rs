//! `kac-lab`: config-driven experiments for the Kac model.

mod commands;
mod config;
mod error;
mod provenance;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::provenance::{ArtifactWriter, Provenance};

#[derive(Parser)]
#[command(name = "kac-lab", version, about = "Experiments on Kac's collision model")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment config; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `out_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Random seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Galerkin spectral gap and Rayleigh quotient estimates for small N.
    Gap,
    /// Local-CLT error envelopes of the normalization function.
    Clt,
    /// H_N/N and D_N/N against their limits.
    EntropyScan,
    /// Entropic gap ratios D_N/H_N against 2/(N-1).
    Villani,
    /// Entropy production over entropy for the two-scale mixtures.
    Cercignani,
    /// Rescaled N-particle inequality, log-power envelope, limit inequality.
    Inequality,
    /// Limit equation evolution with the H-theorem checks.
    Pde,
    /// Particle simulation against the limit equation.
    Chaos,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gap => "gap",
            Command::Clt => "clt",
            Command::EntropyScan => "entropy-scan",
            Command::Villani => "villani",
            Command::Cercignani => "cercignani",
            Command::Inequality => "inequality",
            Command::Pde => "pde",
            Command::Chaos => "chaos",
        }
    }
}

fn run(cli: &Cli) -> CliResult<serde_json::Value> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = Some(out.clone());
    }
    config.validate()?;
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }

    let name = cli.command.name();
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(name));
    let mut out = ArtifactWriter::new(&dir, Provenance::new(name, &config)?)?;
    let report = match cli.command {
        Command::Gap => commands::gap(&config, &mut out),
        Command::Clt => commands::clt(&config, &mut out),
        Command::EntropyScan => commands::entropy_scan(&config, &mut out),
        Command::Villani => commands::villani(&config, &mut out),
        Command::Cercignani => commands::cercignani(&config, &mut out),
        Command::Inequality => commands::inequality(&config, &mut out),
        Command::Pde => commands::pde(&config, &mut out),
        Command::Chaos => commands::chaos(&config, &mut out),
    }?;
    let summary = json!({
        "status": if report.failures.is_empty() { "ok" } else { "tolerance" },
        "failures": report.failures,
        "summary": report.summary,
        "config": config,
    });
    out.json("summary.json", &summary)?;
    if report.failures.is_empty() {
        Ok(summary)
    } else {
        Err(CliError::Tolerance(report.failures.join("; ")))
    }
}

fn print_json(doc: &serde_json::Value) {
    let text = serde_json::to_string_pretty(doc).unwrap_or_default();
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print_json(&summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() });
            print_json(&doc);
            eprintln!("kac-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
