//! Batch execution: bounded parallelism, per-query failure isolation, and
//! output order equal to input order regardless of interleaving.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{run_query_traced, PipelineConfig, PipelineError};
use crate::adapter::AdapterBackend;
use crate::metrics::{EvalRecord, RecordMode};
use crate::model::Query;

/// One line of a batch input file: the query plus optional scoring data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchQuery {
    #[serde(flatten)]
    pub query: Query,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<String>,
}

impl BatchQuery {
    pub fn new(query: Query) -> Self {
        Self {
            query,
            gold: Vec::new(),
            subtask: None,
        }
    }

    pub fn with_gold(mut self, gold: Vec<String>) -> Self {
        self.gold = gold;
        self
    }

    pub fn with_subtask(mut self, subtask: impl Into<String>) -> Self {
        self.subtask = Some(subtask.into());
        self
    }
}

/// Parses JSON Lines of [`BatchQuery`]; blank lines are skipped.
pub fn read_batch_jsonl(text: &str) -> Result<Vec<BatchQuery>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| PipelineError::Config(format!("queries line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    /// Worker threads; clamped to at least 1.
    pub parallelism: usize,
    /// When set, each query writes `<query_id>.trace.json` here.
    pub trace_dir: Option<PathBuf>,
    /// Zero out latencies and event timestamps for reproducible output.
    pub no_timestamps: bool,
}

/// Runs every query against the backend. Per-query failures become `failed`
/// records; only configuration problems abort the batch.
pub fn run_batch(
    queries: &[BatchQuery],
    backend: &dyn AdapterBackend,
    cfg: &PipelineConfig,
    opts: &BatchOptions,
) -> Result<Vec<EvalRecord>, PipelineError> {
    cfg.validate()?;
    let mut seen = std::collections::BTreeSet::new();
    for q in queries {
        if !seen.insert(q.query.query_id.as_str()) {
            return Err(PipelineError::Config(format!(
                "duplicate query_id {:?}",
                q.query.query_id
            )));
        }
    }
    if let Some(dir) = &opts.trace_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| PipelineError::Config(format!("trace dir {}: {e}", dir.display())))?;
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<EvalRecord>>> = Mutex::new(vec![None; queries.len()]);
    let workers = opts.parallelism.max(1).min(queries.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= queries.len() {
                    break;
                }
                let record = run_one(&queries[index], backend, cfg, opts);
                results.lock().expect("results lock")[index] = Some(record);
            });
        }
    });

    Ok(results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every index filled"))
        .collect())
}

fn run_one(
    task: &BatchQuery,
    backend: &dyn AdapterBackend,
    cfg: &PipelineConfig,
    opts: &BatchOptions,
) -> EvalRecord {
    let outcome = run_query_traced(&task.query, backend, cfg);
    let mut trace = outcome.trace;
    if opts.no_timestamps {
        trace.strip_timestamps();
    }
    let trace_path = opts.trace_dir.as_ref().and_then(|dir| {
        match trace.write_to_dir(dir) {
            Ok(path) => Some(path.display().to_string()),
            Err(e) => {
                tracing::warn!(query_id = %task.query.query_id, "trace write failed: {e}");
                None
            }
        }
    });
    let latency_ms = if opts.no_timestamps { 0.0 } else { trace.latency_ms };
    match outcome.answer {
        Ok(answer) => EvalRecord {
            query_id: task.query.query_id.clone(),
            predicted: answer.text,
            gold: task.gold.clone(),
            mode: RecordMode::from(answer.mode),
            subtask: task.subtask.clone(),
            image_ref: task.query.image_ref.clone(),
            latency_ms,
            trace: trace_path,
            error: None,
            flags: trace.flags.clone(),
        },
        Err(err) => EvalRecord {
            query_id: task.query.query_id.clone(),
            predicted: String::new(),
            gold: task.gold.clone(),
            mode: RecordMode::Failed,
            subtask: task.subtask.clone(),
            image_ref: task.query.image_ref.clone(),
            latency_ms,
            trace: trace_path,
            error: Some(err.to_string()),
            flags: trace.flags.clone(),
        },
    }
}
