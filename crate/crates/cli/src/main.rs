//! `protocol-games`: seeded experiment runner over the protocol games.
//!
//! `run` executes one experiment from a self-describing JSON config and
//! writes a verdict JSON (plus optional CSV transcripts) into the output
//! directory; `render` formats a saved verdict as a plain-text table.
//!
//! Exit codes: 0 = all properties passed, 1 = a property was violated,
//! 2 = configuration error, 3 = internal fault.

use protocol_games::config;
use protocol_games::render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::{ExperimentConfig, ExperimentKind};
use protocol_games_core::experiments::{
    self, chernoff_report, defense_report, efid_report_rows, lowerbound_report,
    transfattack_report, trichotomy_report_rows, watermark_report, ReportRow,
};
use protocol_games_core::protocols::{transcript_csv, TranscriptRow};
use protocol_games_core::rng::Seed;

#[derive(Parser)]
#[command(name = "protocol-games", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run(RunArgs),
    /// Render a saved verdict JSON as a plain-text table.
    Render(RenderArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads for trial loops (deterministic aggregation).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Path to a verdict JSON written by `run`.
    verdict: PathBuf,
}

/// Envelope written to the verdict file: config echo, verdict, rows, flag.
#[derive(Serialize, Deserialize)]
struct VerdictEnvelope {
    experiment: String,
    seed: u64,
    verdict: serde_json::Value,
    report_rows: Vec<ReportRow>,
    pass: bool,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => match run(&args) {
            Ok(pass) => {
                if pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(CliError::Config(msg)) => {
                eprintln!("configuration error: {msg}");
                ExitCode::from(2)
            }
            Err(CliError::Internal(msg)) => {
                eprintln!("internal error: {msg}");
                ExitCode::from(3)
            }
        },
        Command::Render(args) => match render_file(&args.verdict) {
            Ok(table) => {
                print!("{table}");
                ExitCode::SUCCESS
            }
            Err(CliError::Config(msg)) => {
                eprintln!("malformed verdict: {msg}");
                ExitCode::from(2)
            }
            Err(CliError::Internal(msg)) => {
                eprintln!("internal error: {msg}");
                ExitCode::from(3)
            }
        },
    }
}

enum CliError {
    Config(String),
    Internal(String),
}

fn run(args: &RunArgs) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text).map_err(CliError::Config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        override_trials(&mut config.experiment, trials);
    }
    if let Some(threads) = args.threads {
        override_threads(&mut config.experiment, threads);
    }
    config.validate().map_err(CliError::Config)?;

    let seed = Seed(config.seed);
    let mut transcripts: Option<Vec<TranscriptRow>> = config
        .output
        .transcripts_csv
        .as_ref()
        .map(|_| Vec::new());

    let internal = |e: experiments::ExperimentError| CliError::Internal(e.to_string());
    let (verdict, rows, pass): (serde_json::Value, Vec<ReportRow>, bool) =
        match &config.experiment {
            ExperimentKind::Transfattack(e) => {
                let v = e.run(seed, transcripts.as_mut()).map_err(internal)?;
                let rows = transfattack_report(&v, e.c, e.s);
                let pass = v.passes.all;
                (to_value(&v)?, rows, pass)
            }
            ExperimentKind::Watermark(e) => {
                let v = e.run(seed, transcripts.as_mut()).map_err(internal)?;
                let rows = watermark_report(&v, &e.params(), e.advantage_threshold);
                let pass = v.passes.all;
                (to_value(&v)?, rows, pass)
            }
            ExperimentKind::Defense(e) => {
                let v = e.run(seed, transcripts.as_mut()).map_err(internal)?;
                let rows = defense_report(&v, &e.params());
                let pass = v.passes.all;
                (to_value(&v)?, rows, pass)
            }
            ExperimentKind::Trichotomy(e) => {
                let v = e.run(seed).map_err(internal)?;
                let rows = trichotomy_report_rows(&v);
                let pass = rows.iter().all(|r| r.pass);
                (to_value(&v)?, rows, pass)
            }
            ExperimentKind::Efid(e) => {
                let v = e.run(seed).map_err(internal)?;
                let rows = efid_report_rows(&v);
                let pass = v.pass;
                (to_value(&v)?, rows, pass)
            }
            ExperimentKind::Lowerbound(e) => {
                let v = e.run(seed).map_err(internal)?;
                let rows = lowerbound_report(&v);
                let pass = v.pass;
                (to_value(&v)?, rows, pass)
            }
            ExperimentKind::ChernoffAudit(e) => {
                let v = e.run(seed).map_err(internal)?;
                let rows = chernoff_report(&v);
                let pass = v.pass;
                (to_value(&v)?, rows, pass)
            }
        };

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Internal(format!("cannot create output directory: {e}")))?;
    let envelope = VerdictEnvelope {
        experiment: config.experiment.name().to_string(),
        seed: config.seed,
        verdict,
        report_rows: rows,
        pass,
    };
    let verdict_path = args.out.join(&config.output.verdict);
    let json = serde_json::to_string_pretty(&envelope)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(&verdict_path, json.as_bytes())
        .map_err(|e| CliError::Internal(format!("cannot write verdict: {e}")))?;

    if let (Some(rows), Some(name)) = (&transcripts, &config.output.transcripts_csv) {
        let csv_path = args.out.join(name);
        std::fs::write(&csv_path, transcript_csv(rows))
            .map_err(|e| CliError::Internal(format!("cannot write transcripts: {e}")))?;
    }

    println!("{}", render::render_table(&envelope.report_rows));
    println!(
        "experiment {} seed {}: {}",
        envelope.experiment,
        envelope.seed,
        if pass { "PASS" } else { "FAIL" }
    );
    println!("verdict written to {}", verdict_path.display());
    Ok(pass)
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn override_trials(kind: &mut ExperimentKind, trials: u64) {
    match kind {
        ExperimentKind::Watermark(e) => e.trials = trials,
        ExperimentKind::Defense(e) => e.trials = trials,
        ExperimentKind::Transfattack(e) => e.trials = trials,
        ExperimentKind::Trichotomy(e) => e.per_cell_trials = trials,
        ExperimentKind::Efid(e) => e.verification_trials = trials,
        ExperimentKind::Lowerbound(e) => e.trials = trials,
        ExperimentKind::ChernoffAudit(e) => e.repetitions = trials,
    }
}

fn override_threads(kind: &mut ExperimentKind, threads: usize) {
    match kind {
        ExperimentKind::Watermark(e) => e.threads = threads,
        ExperimentKind::Defense(e) => e.threads = threads,
        ExperimentKind::Transfattack(e) => e.threads = threads,
        ExperimentKind::Trichotomy(e) => e.threads = threads,
        ExperimentKind::Efid(e) => e.threads = threads,
        ExperimentKind::Lowerbound(e) => e.threads = threads,
        ExperimentKind::ChernoffAudit(e) => e.threads = threads,
    }
}

fn render_file(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let envelope: VerdictEnvelope =
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(render::render_table(&envelope.report_rows))
}
