use std::path::PathBuf;

use clap::Args;

use fast_core::analysis::{bench_report, compare_modes, expected_runtime, ModeScores, RuntimeModel};
use fast_core::metrics::read_records_jsonl;
use serde::Serialize;

use super::{read_input, write_output, CmdError};

#[derive(Args)]
pub struct BenchArgs {
    /// Measured batch records (JSONL); mutually exclusive with the analytic flags
    #[arg(long)]
    records: Option<PathBuf>,
    /// Analytic fast-mode latency, ms
    #[arg(long)]
    t_fast: Option<f64>,
    /// Analytic slow-mode latency, ms
    #[arg(long)]
    t_slow: Option<f64>,
    /// Analytic fast-mode fraction in [0, 1]
    #[arg(long)]
    p_fast: Option<f64>,
    /// Benchmark score attached to the fast-only row (pass-through)
    #[arg(long)]
    score_fast: Option<f64>,
    /// Benchmark score attached to the slow-only row (pass-through)
    #[arg(long)]
    score_slow: Option<f64>,
    /// Benchmark score attached to the mixed row (pass-through)
    #[arg(long)]
    score_mixed: Option<f64>,
    /// Report output (JSON); stdout when omitted, table then goes to stderr
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct AnalyticReport {
    model: RuntimeModel,
    expected_ms: f64,
    comparison: fast_core::analysis::ModeComparison,
}

pub fn execute(args: BenchArgs) -> Result<(), CmdError> {
    let scores = ModeScores {
        fast: args.score_fast,
        slow: args.score_slow,
        mixed: args.score_mixed,
    };
    let (json, table) = match (&args.records, args.t_fast, args.t_slow, args.p_fast) {
        (Some(path), None, None, None) => {
            let records = read_records_jsonl(&read_input(path)?)
                .map_err(|e| CmdError::Data(e.to_string()))?;
            let report = bench_report(&records).map_err(|e| CmdError::Data(e.to_string()))?;
            let table = report.comparison.render_table();
            (super::to_pretty_json(&report), table)
        }
        (None, Some(t_fast), Some(t_slow), Some(p_fast)) => {
            let model = RuntimeModel::new(t_fast, t_slow, p_fast)
                .map_err(|e| CmdError::Data(e.to_string()))?;
            let comparison = compare_modes(t_fast, t_slow, p_fast, Some(scores))
                .map_err(|e| CmdError::Data(e.to_string()))?;
            let table = comparison.render_table();
            let report = AnalyticReport {
                model,
                expected_ms: expected_runtime(&model),
                comparison,
            };
            (super::to_pretty_json(&report), table)
        }
        _ => {
            return Err(CmdError::Usage(
                "bench needs either --records, or all of --t-fast --t-slow --p-fast".into(),
            ))
        }
    };
    match &args.out {
        Some(_) => {
            write_output(args.out.as_ref(), &json)?;
            print!("{table}");
        }
        None => {
            write_output(None, &json)?;
            eprint!("{table}");
        }
    }
    Ok(())
}
