//! Switch-ratio / per-mode accuracy reporting and the linear-mixture
//! runtime model comparing pure-fast, pure-slow, and mixed operation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{is_correct, EvalRecord, RecordMode};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("analysis undefined on empty input")]
    EmptyInput,
    #[error("record {query_id}: {reason}")]
    Record { query_id: String, reason: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// How often the system stayed in fast mode and how each mode scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub dataset: String,
    /// n_fast / (n_fast + n_slow).
    pub fast_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slow_acc: Option<f64>,
    pub n_fast: u64,
    pub n_slow: u64,
}

/// Computes the mode report from scored records. Failed records are excluded
/// from the ratio; accuracies are reported as absent for empty modes.
pub fn mode_report(dataset: &str, records: &[EvalRecord]) -> Result<ModeReport, AnalysisError> {
    let mut n_fast = 0u64;
    let mut n_slow = 0u64;
    let mut fast_correct = 0u64;
    let mut slow_correct = 0u64;
    for record in records {
        if record.mode == RecordMode::Failed {
            continue;
        }
        if record.gold.is_empty() {
            return Err(AnalysisError::Record {
                query_id: record.query_id.clone(),
                reason: "no gold answers; correctness undefined".into(),
            });
        }
        let correct = is_correct(record);
        match record.mode {
            RecordMode::Fast => {
                n_fast += 1;
                fast_correct += u64::from(correct);
            }
            RecordMode::Slow => {
                n_slow += 1;
                slow_correct += u64::from(correct);
            }
            RecordMode::Failed => unreachable!(),
        }
    }
    let total = n_fast + n_slow;
    if total == 0 {
        return Err(AnalysisError::EmptyInput);
    }
    Ok(ModeReport {
        dataset: dataset.to_string(),
        fast_ratio: n_fast as f64 / total as f64,
        fast_acc: (n_fast > 0).then(|| fast_correct as f64 / n_fast as f64),
        slow_acc: (n_slow > 0).then(|| slow_correct as f64 / n_slow as f64),
        n_fast,
        n_slow,
    })
}

/// Per-query latencies of the two modes and the fast-mode fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRuntimeModel")]
pub struct RuntimeModel {
    pub t_fast_ms: f64,
    pub t_slow_ms: f64,
    pub p_fast: f64,
}

#[derive(Deserialize)]
struct RawRuntimeModel {
    t_fast_ms: f64,
    t_slow_ms: f64,
    p_fast: f64,
}

impl TryFrom<RawRuntimeModel> for RuntimeModel {
    type Error = AnalysisError;

    fn try_from(raw: RawRuntimeModel) -> Result<Self, Self::Error> {
        RuntimeModel::new(raw.t_fast_ms, raw.t_slow_ms, raw.p_fast)
    }
}

impl RuntimeModel {
    pub fn new(t_fast_ms: f64, t_slow_ms: f64, p_fast: f64) -> Result<Self, AnalysisError> {
        for (field, value) in [("t_fast_ms", t_fast_ms), ("t_slow_ms", t_slow_ms)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(AnalysisError::Invalid {
                    field,
                    reason: format!("latency must be positive, got {value}"),
                });
            }
        }
        if !p_fast.is_finite() || !(0.0..=1.0).contains(&p_fast) {
            return Err(AnalysisError::Invalid {
                field: "p_fast",
                reason: format!("fraction must be in [0, 1], got {p_fast}"),
            });
        }
        Ok(Self {
            t_fast_ms,
            t_slow_ms,
            p_fast,
        })
    }
}

/// Expected per-query wall time of the mixed system:
/// `p_fast * t_fast + (1 - p_fast) * t_slow`.
pub fn expected_runtime(model: &RuntimeModel) -> f64 {
    model.p_fast * model.t_fast_ms + (1.0 - model.p_fast) * model.t_slow_ms
}

/// Optional benchmark scores attached to comparison rows; pass-through data,
/// never recomputed here.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeScores {
    pub fast: Option<f64>,
    pub slow: Option<f64>,
    pub mixed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub runtime_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<f64>,
}

/// Three-row runtime table: fast-only, slow-only, and the mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub rows: Vec<ComparisonRow>,
    pub model: RuntimeModel,
}

pub fn compare_modes(
    t_fast_ms: f64,
    t_slow_ms: f64,
    p_fast: f64,
    scores: Option<ModeScores>,
) -> Result<ModeComparison, AnalysisError> {
    let model = RuntimeModel::new(t_fast_ms, t_slow_ms, p_fast)?;
    let scores = scores.unwrap_or_default();
    let rows = vec![
        ComparisonRow {
            label: "System 1 Only".into(),
            runtime_ms: t_fast_ms,
            result: scores.fast,
        },
        ComparisonRow {
            label: "System 2 Only".into(),
            runtime_ms: t_slow_ms,
            result: scores.slow,
        },
        ComparisonRow {
            label: format!("Mixed (p_fast={p_fast})"),
            runtime_ms: expected_runtime(&model),
            result: scores.mixed,
        },
    ];
    Ok(ModeComparison { rows, model })
}

impl ModeComparison {
    /// Aligned plain-text table for terminals.
    pub fn render_table(&self) -> String {
        let label_width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(4)
            .max("mode".len());
        let mut out = format!("{:<label_width$}  {:>12}  {:>10}\n", "mode", "runtime_ms", "result");
        for row in &self.rows {
            let result = row
                .result
                .map(|v| format!("{v:.1}"))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<label_width$}  {:>12.1}  {:>10}\n",
                row.label, row.runtime_ms, result
            ));
        }
        out
    }
}

/// Empirical runtime model from batch records: mean latency per mode and the
/// observed fast fraction. Failed records are excluded.
pub fn runtime_from_records(records: &[EvalRecord]) -> Result<RuntimeModel, AnalysisError> {
    let fast: Vec<f64> = records
        .iter()
        .filter(|r| r.mode == RecordMode::Fast)
        .map(|r| r.latency_ms)
        .collect();
    let slow: Vec<f64> = records
        .iter()
        .filter(|r| r.mode == RecordMode::Slow)
        .map(|r| r.latency_ms)
        .collect();
    if fast.is_empty() || slow.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let t_fast = fast.iter().sum::<f64>() / fast.len() as f64;
    let t_slow = slow.iter().sum::<f64>() / slow.len() as f64;
    let p_fast = fast.len() as f64 / (fast.len() + slow.len()) as f64;
    RuntimeModel::new(t_fast, t_slow, p_fast)
}

/// Runtime analysis over measured records: the fitted mixture next to the
/// measured overall mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: RuntimeModel,
    pub expected_ms: f64,
    pub measured_mean_ms: f64,
    pub comparison: ModeComparison,
}

pub fn bench_report(records: &[EvalRecord]) -> Result<BenchReport, AnalysisError> {
    let model = runtime_from_records(records)?;
    let completed: Vec<f64> = records
        .iter()
        .filter(|r| r.mode != RecordMode::Failed)
        .map(|r| r.latency_ms)
        .collect();
    let measured_mean_ms = completed.iter().sum::<f64>() / completed.len() as f64;
    let comparison = compare_modes(model.t_fast_ms, model.t_slow_ms, model.p_fast, None)?;
    Ok(BenchReport {
        model,
        expected_ms: expected_runtime(&model),
        measured_mean_ms,
        comparison,
    })
}
