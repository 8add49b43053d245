//! `posefuse`: simulate drifting pose streams, reconstruct them under each
//! update strategy, score checkpoints, and summarize stream statistics.

mod commands;
mod meta;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "posefuse", version, about = "Online reconstruction under dynamic SLAM poses")]
struct Cli {
    /// Caps the worker threads used for fusion, rendering and evaluation.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render depth frames along an orbit and emit a drifting pose stream.
    Simulate(commands::simulate::Args),
    /// Replay a pose stream into a volume under one update strategy.
    Reconstruct(commands::reconstruct::Args),
    /// Score checkpoint meshes against time-dependent ground truth.
    Evaluate(commands::evaluate::Args),
    /// Histogram of the total update distance travelled by each frame.
    Stats(commands::stats::Args),
}

/// Bad flags or flag combinations; exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PROTOCOL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    let protocol = err
        .chain()
        .filter_map(|e| e.downcast_ref::<posefuse_core::Error>())
        .any(posefuse_core::Error::is_protocol_violation);
    if protocol {
        EXIT_PROTOCOL
    } else {
        EXIT_DATA
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Reconstruct(args) => commands::reconstruct::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Stats(args) => commands::stats::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
