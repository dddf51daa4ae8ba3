//! `proofseek`: formalize policies, prove statements, run benchmarks and
//! curate training data.
//!
//! Exit status: 0 verified or completed, 1 proof or row failure, 2 aborted
//! (configuration, infrastructure or interruption).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{BenchArgs, PolicyArgs, ReportSource, Status};
use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "proofseek", version, about = "Proof search and formalization pipeline")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prove one statement and print its attempt record.
    Prove {
        /// File holding the formal statement.
        statement: PathBuf,
        #[arg(long)]
        name: Option<String>,
        /// Append model calls to this JSONL file.
        #[arg(long)]
        prompt_log: Option<PathBuf>,
    },
    /// Formalize access policies (a CSV of policies or one JSON policy).
    Policy {
        input: PathBuf,
        #[arg(long, default_value = "out/policy")]
        out: PathBuf,
        /// Use the staged model workflow instead of the compiler.
        #[arg(long)]
        llm: bool,
        #[arg(long)]
        few_shots: Option<PathBuf>,
    },
    /// Formalize natural-language statements from JSONL
    /// (`problem_name`, `statement`).
    Formalize {
        input: PathBuf,
        #[arg(long, default_value = "out/formalize")]
        out: PathBuf,
        #[arg(long)]
        few_shots: Option<PathBuf>,
    },
    /// Run the prover over a benchmark JSONL and write a report. Resumes from
    /// existing records.
    Bench {
        problems: PathBuf,
        #[arg(long, default_value = "out/bench")]
        out: PathBuf,
        /// Dataset label; defaults to the file stem.
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Split a theorem-proof corpus and build SFT and RL datasets.
    Curate {
        corpus: PathBuf,
        #[arg(long, default_value = "out/curate")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        sft_count: usize,
    },
    /// Tabulate existing record files.
    Report {
        /// `DATASET,METHOD,RECORDS_PATH`, repeatable.
        #[arg(long = "row", required = true)]
        rows: Vec<ReportSource>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run(cli: Cli, cancel: &AtomicBool) -> Result<Status> {
    let config = RunConfig::resolve(&cli.overrides)?;
    log::debug!("configuration: {config:?}");
    match cli.command {
        Command::Prove { statement, name, prompt_log } => {
            let text = std::fs::read_to_string(&statement)
                .with_context(|| format!("reading {}", statement.display()))?;
            let name = name.unwrap_or_else(|| {
                statement.file_stem().and_then(|s| s.to_str()).unwrap_or("statement").to_string()
            });
            commands::prove(&config, &name, &text, prompt_log.as_deref())
        }
        Command::Policy { input, out, llm, few_shots } => commands::policy(
            &config,
            PolicyArgs { input: &input, out: &out, llm, few_shots: few_shots.as_deref() },
        ),
        Command::Formalize { input, out, few_shots } => {
            commands::formalize(&config, &input, &out, few_shots.as_deref())
        }
        Command::Bench { problems, out, dataset } => commands::bench(
            &config,
            BenchArgs { problems: &problems, out: &out, dataset: dataset.as_deref() },
            cancel,
        ),
        Command::Curate { corpus, out, sft_count } => commands::curate(&config, &corpus, &out, sft_count),
        Command::Report { rows, csv } => commands::report(&config, &rows, csv.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    if let Err(e) = ctrlc::set_handler(move || {
        log::warn!("interrupted; finishing in-flight problems");
        flag.store(true, Ordering::SeqCst);
    }) {
        log::warn!("cannot install interrupt handler: {e}");
    }

    let status = match run(cli, &cancel) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::error_status(&e)
        }
    };
    ExitCode::from(status as u8)
}
