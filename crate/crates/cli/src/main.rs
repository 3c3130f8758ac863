//! `fast`: command-line front end for the dual-mode visual agent pipeline.
//!
//! Subcommands: run queries against a backend, serve the mock adapter
//! service, build the negative switching dataset, score predictions, and
//! produce mode/runtime analysis reports.

mod commands;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{CmdError, Command};

#[derive(Parser)]
#[command(
    name = "fast",
    version,
    about = "Dual-mode visual agent pipeline: route queries between a direct answer and a chain-of-evidence path"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn init_logging() {
    use tracing_subscriber::filter::{EnvFilter, LevelFilter};
    let filter = EnvFilter::builder()
        .with_env_var("FAST_PIPELINE_LOG")
        .with_default_directive(LevelFilter::WARN.into())
        .from_env_lossy();
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn main() {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = commands::dispatch(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

impl CmdError {
    fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 64,
            CmdError::Data(_) => 65,
            CmdError::Adapter(_) => 2,
            CmdError::Other(_) => 1,
        }
    }
}
