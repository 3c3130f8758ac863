use std::path::PathBuf;

use clap::Args;

use fast_core::analysis::mode_report;
use fast_core::metrics::read_records_jsonl;

use super::{read_input, write_output, CmdError};

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Batch records (JSONL) with gold answers
    #[arg(long)]
    records: PathBuf,
    /// Dataset name echoed into the report
    #[arg(long, default_value = "records")]
    dataset: String,
    /// Report output (JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn execute(args: AnalyzeArgs) -> Result<(), CmdError> {
    let records = read_records_jsonl(&read_input(&args.records)?)
        .map_err(|e| CmdError::Data(e.to_string()))?;
    let report =
        mode_report(&args.dataset, &records).map_err(|e| CmdError::Data(e.to_string()))?;
    write_output(args.out.as_ref(), &super::to_pretty_json(&report))
}
