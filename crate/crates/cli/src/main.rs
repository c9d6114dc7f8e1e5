//! `sppkit` command-line front end.
//!
//! stdout carries only machine-readable output (JSON from `eval` and
//! `model-info`); diagnostics go to stderr.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod dataset;
mod enhance;
mod error;
mod eval;
mod model;

use error::{CliError, CliResult};

/// Worker count for commands that process several utterances.
const THREADS_ENV: &str = "SPP_ENHANCE_THREADS";

#[derive(Parser)]
#[command(name = "sppkit", version, about = "Speech presence probability estimation and speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance a noisy mono 16 kHz WAV file.
    Enhance(enhance::EnhanceArgs),
    /// Write synthetic training pairs and a manifest.
    MakeDataset(dataset::DatasetArgs),
    /// Compute a metric over dumps or WAV files and print a JSON record.
    Eval(eval::EvalArgs),
    /// Print the variant, tensor inventory and parameter count of a model bundle.
    ModelInfo(model::InfoArgs),
    /// Write random model bundles with reference inputs and outputs.
    GenGolden(model::GoldenArgs),
}

/// Prints one JSON record on stdout. A closed pipe is not an error.
pub fn emit(record: &serde_json::Value) -> CliResult<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{record}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::Enhance(args) => enhance::run(args),
        Command::MakeDataset(args) => dataset::run(args),
        Command::Eval(args) => eval::run(args),
        Command::ModelInfo(args) => model::info(args),
        Command::GenGolden(args) => model::gen_golden(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sppkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
