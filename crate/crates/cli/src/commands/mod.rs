mod analyze;
mod bench;
mod dataset;
mod evaluate;
mod run;
mod serve;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Subcommand;

#[derive(Subcommand)]
pub enum Command {
    /// Run one query or a JSONL batch against an adapter backend
    Run(run::RunArgs),
    /// Serve fixtures or a scene oracle over the adapter wire protocol
    ServeMock(serve::ServeMockArgs),
    /// Build negative switching triples and region-proposal records
    BuildDataset(dataset::BuildDatasetArgs),
    /// Score prediction records and mask pairs
    Evaluate(evaluate::EvaluateArgs),
    /// Mode-ratio and per-mode accuracy report over batch records
    Analyze(analyze::AnalyzeArgs),
    /// Runtime comparison of fast-only, slow-only, and mixed operation
    Bench(bench::BenchArgs),
}

pub fn dispatch(command: Command) -> Result<(), CmdError> {
    match command {
        Command::Run(args) => run::execute(args),
        Command::ServeMock(args) => serve::execute(args),
        Command::BuildDataset(args) => dataset::execute(args),
        Command::Evaluate(args) => evaluate::execute(args),
        Command::Analyze(args) => analyze::execute(args),
        Command::Bench(args) => bench::execute(args),
    }
}

/// Command failures carrying their exit-code class: 64 usage, 65 bad data,
/// 2 adapter/transport, 1 anything else.
#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Data(String),
    Adapter(String),
    Other(String),
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(msg)
            | CmdError::Data(msg)
            | CmdError::Adapter(msg)
            | CmdError::Other(msg) => write!(f, "{msg}"),
        }
    }
}

pub(crate) fn read_input(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path)
        .map_err(|e| CmdError::Data(format!("reading {}: {e}", path.display())))
}

/// Writes to the path when given, otherwise to stdout.
pub(crate) fn write_output(out: Option<&PathBuf>, content: &str) -> Result<(), CmdError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CmdError::Other(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub(crate) fn to_pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}
