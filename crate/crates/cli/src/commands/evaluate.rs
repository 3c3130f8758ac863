use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use fast_core::metrics::{
    exact_match_accuracy, mme_score, pope_f1, read_records_jsonl, seg_report, MaskPair,
    MaskPairManifestEntry, MmeReport, PopeReport, SegReport,
};
use fast_core::model::Mask;

use super::{read_input, write_output, CmdError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Exact,
    Pope,
    Mme,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Batch records (JSONL) to score
    #[arg(long)]
    records: Option<PathBuf>,
    /// Metrics to compute over --records
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Metric::Exact])]
    metrics: Vec<Metric>,
    /// Mask-pair manifest: JSON list of {image_ref, predicted, gold} paths
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Report output (JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_match: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pope: Option<PopeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mme: Option<MmeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    segmentation: Option<SegReport>,
}

pub fn execute(args: EvaluateArgs) -> Result<(), CmdError> {
    if args.records.is_none() && args.masks.is_none() {
        return Err(CmdError::Usage(
            "evaluate requires --records and/or --masks".into(),
        ));
    }
    let mut report = EvaluationReport {
        exact_match: None,
        pope: None,
        mme: None,
        segmentation: None,
    };

    if let Some(path) = &args.records {
        let records = read_records_jsonl(&read_input(path)?)
            .map_err(|e| CmdError::Data(e.to_string()))?;
        for metric in &args.metrics {
            match metric {
                Metric::Exact => {
                    report.exact_match = Some(
                        exact_match_accuracy(&records)
                            .map_err(|e| CmdError::Data(e.to_string()))?,
                    )
                }
                Metric::Pope => {
                    report.pope =
                        Some(pope_f1(&records).map_err(|e| CmdError::Data(e.to_string()))?)
                }
                Metric::Mme => {
                    report.mme =
                        Some(mme_score(&records).map_err(|e| CmdError::Data(e.to_string()))?)
                }
            }
        }
    }

    if let Some(path) = &args.masks {
        let pairs = load_mask_pairs(path)?;
        report.segmentation =
            Some(seg_report(&pairs).map_err(|e| CmdError::Data(e.to_string()))?);
    }

    write_output(args.out.as_ref(), &super::to_pretty_json(&report))
}

fn load_mask_pairs(manifest_path: &Path) -> Result<Vec<MaskPair>, CmdError> {
    let entries: Vec<MaskPairManifestEntry> = serde_json::from_str(&read_input(manifest_path)?)
        .map_err(|e| CmdError::Data(format!("mask manifest: {e}")))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    entries
        .into_iter()
        .map(|entry| {
            let predicted = load_mask(&base.join(&entry.predicted))?;
            let gold = load_mask(&base.join(&entry.gold))?;
            MaskPair::new(predicted, gold, entry.image_ref)
                .map_err(|e| CmdError::Data(e.to_string()))
        })
        .collect()
}

fn load_mask(path: &Path) -> Result<Mask, CmdError> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| CmdError::Data(format!("mask {}: {e}", path.display())))
}
