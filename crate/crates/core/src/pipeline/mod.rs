//! The dual-mode control flow: trigger detection, the direct fast path, and
//! the slow chain-of-evidence path, with per-query tracing.
//!
//! A query first goes to the switch adapter. If its answer contains the
//! trigger phrase the engine enters slow mode: it parses the missing objects
//! and context clues from the refusal, asks for a region, optionally narrows
//! to boxes, optionally segments a mask, and finally asks for a summarized
//! answer over the assembled chain. Otherwise the switch answer is final.

mod batch;
mod trace;

pub use batch::{read_batch_jsonl, run_batch, BatchOptions, BatchQuery};
pub use trace::{QueryTrace, RequestSummary, ResponseSummary, TraceEvent};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{call_adapter, AdapterBackend, AdapterError, AdapterRequest};
use crate::model::{ContextClue, EvidenceChain, FinalAnswer, MissingObject, Mode, Query};
use trace::now_ms;

/// Trigger substring whose presence in a switch answer activates slow mode.
pub const DEFAULT_TRIGGER_PHRASE: &str = "sorry, i can not answer";

/// What evidence the summarize request should foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SummarizeWith {
    Boxes,
    Mask,
    #[default]
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Two proposal calls (region, then boxes) instead of region only.
    pub two_stage_proposal: bool,
    pub enable_segmentation: bool,
    /// Matched as a substring of the lowercased switch answer.
    pub trigger_phrase: String,
    pub summarize_with: SummarizeWith,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            two_stage_proposal: true,
            enable_segmentation: true,
            trigger_phrase: DEFAULT_TRIGGER_PHRASE.to_string(),
            summarize_with: SummarizeWith::Both,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.trigger_phrase.trim().is_empty() {
            return Err(PipelineError::Config(
                "trigger_phrase must be non-empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("step {step} failed: {source}")]
    Step {
        step: String,
        #[source]
        source: AdapterError,
    },
}

impl PipelineError {
    /// Name of the adapter step that failed, if any.
    pub fn step(&self) -> Option<&str> {
        match self {
            PipelineError::Step { step, .. } => Some(step),
            PipelineError::Config(_) => None,
        }
    }
}

/// Outcome of trigger detection on a switch answer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecision {
    pub mode: Mode,
    pub missing: Vec<MissingObject>,
    pub clues: Vec<ContextClue>,
    /// Trigger matched but the structured tail was unparseable.
    pub degraded: bool,
}

/// Decides fast vs slow from the raw switch answer and, in slow mode,
/// extracts the missing objects and context clues from the structured tail
/// ("Missing objects: [a, b]. Context: ...").
pub fn detect_mode(raw_switch_text: &str, cfg: &PipelineConfig) -> ModeDecision {
    let lower = raw_switch_text.to_lowercase();
    let trigger = cfg.trigger_phrase.to_lowercase();
    if !lower.contains(&trigger) {
        return ModeDecision {
            mode: Mode::Fast,
            missing: Vec::new(),
            clues: Vec::new(),
            degraded: false,
        };
    }
    let missing = parse_missing(raw_switch_text);
    let clues = parse_clue(raw_switch_text);
    let degraded = missing.is_empty();
    ModeDecision {
        mode: Mode::Slow,
        missing,
        clues,
        degraded,
    }
}

fn parse_missing(text: &str) -> Vec<MissingObject> {
    let lower = text.to_lowercase();
    let Some(marker) = lower.find("missing objects:") else {
        return Vec::new();
    };
    let after = &text[marker + "missing objects:".len()..];
    let Some(open) = after.find('[') else {
        return Vec::new();
    };
    let Some(close) = after[open..].find(']').map(|i| open + i) else {
        return Vec::new();
    };
    after[open + 1..close]
        .split(',')
        .filter_map(|part| MissingObject::new(part.trim()).ok())
        .collect()
}

fn parse_clue(text: &str) -> Vec<ContextClue> {
    let lower = text.to_lowercase();
    let Some(marker) = lower.find("context:") else {
        return Vec::new();
    };
    let tail = text[marker + "context:".len()..].trim();
    ContextClue::new(tail).into_iter().collect()
}

/// A finished query: the answer (or the failure) plus its trace.
#[derive(Debug)]
pub struct QueryOutcome {
    pub answer: Result<FinalAnswer, PipelineError>,
    pub trace: QueryTrace,
}

struct StepRunner<'a> {
    backend: &'a dyn AdapterBackend,
    trace: QueryTrace,
}

impl StepRunner<'_> {
    fn call(
        &mut self,
        req: AdapterRequest,
    ) -> Result<crate::adapter::AdapterResponse, PipelineError> {
        let t_start_ms = now_ms();
        let result = call_adapter(self.backend, &req);
        let t_end_ms = now_ms();
        self.trace.events.push(TraceEvent {
            step: req.role.to_string(),
            request: (&req).into(),
            response: result.as_ref().ok().map(Into::into),
            t_start_ms,
            t_end_ms,
        });
        result.map_err(|source| PipelineError::Step {
            step: req.role.to_string(),
            source,
        })
    }
}

/// Runs one query end to end, returning the answer and the full trace.
pub fn run_query_traced(
    query: &Query,
    backend: &dyn AdapterBackend,
    cfg: &PipelineConfig,
) -> QueryOutcome {
    let mut runner = StepRunner {
        backend,
        trace: QueryTrace::begin(query),
    };
    let started = std::time::Instant::now();
    let answer = run_steps(query, cfg, &mut runner);
    let mut trace = runner.trace;
    trace.latency_ms = started.elapsed().as_secs_f64() * 1e3;
    match &answer {
        Ok(final_answer) => {
            trace.mode = Some(final_answer.mode);
            trace.answer = Some(final_answer.text.clone());
            trace.chain = final_answer.chain.clone();
        }
        Err(err) => {
            trace.error = Some(err.to_string());
        }
    }
    let answer = answer.map(|mut a| {
        a.latency_ms = trace.latency_ms;
        a
    });
    QueryOutcome { answer, trace }
}

/// Runs one query and returns just the answer.
pub fn run_query(
    query: &Query,
    backend: &dyn AdapterBackend,
    cfg: &PipelineConfig,
) -> Result<FinalAnswer, PipelineError> {
    run_query_traced(query, backend, cfg).answer
}

fn run_steps(
    query: &Query,
    cfg: &PipelineConfig,
    runner: &mut StepRunner<'_>,
) -> Result<FinalAnswer, PipelineError> {
    cfg.validate()?;

    let switch = runner.call(AdapterRequest::switch(query.clone()))?;
    let decision = detect_mode(&switch.raw_text, cfg);
    if decision.degraded {
        runner.trace.degraded = true;
        runner.trace.flags.push("degraded_slow".into());
        tracing::warn!(
            query_id = %query.query_id,
            "trigger matched but the refusal tail was unparseable; continuing with empty clues"
        );
    }
    if decision.mode == Mode::Fast {
        return Ok(FinalAnswer::new(switch.raw_text, Mode::Fast, None, 0.0)
            .expect("fast answer without chain is valid"));
    }

    let ModeDecision { missing, clues, .. } = decision;

    let region_resp = runner.call(AdapterRequest::propose_region(query.clone(), clues.clone()))?;
    let region = region_resp
        .region
        .expect("validated propose_region response carries a region");

    let boxes = if cfg.two_stage_proposal {
        let resp = runner.call(AdapterRequest::propose_boxes(
            query.clone(),
            clues.clone(),
            region,
        ))?;
        if resp.boxes.is_empty() {
            runner.trace.flags.push("empty_proposal".into());
        }
        resp.boxes
    } else {
        Vec::new()
    };

    let mask = if !cfg.enable_segmentation {
        None
    } else if missing.is_empty() {
        runner.trace.flags.push("segment_skipped_no_missing".into());
        None
    } else if cfg.two_stage_proposal {
        if boxes.is_empty() {
            // nothing to segment inside; the empty_proposal flag is already set
            None
        } else {
            let resp = runner.call(AdapterRequest::segment(
                query.clone(),
                missing.clone(),
                boxes.clone(),
                None,
            ))?;
            resp.mask
        }
    } else {
        let resp = runner.call(AdapterRequest::segment(
            query.clone(),
            missing.clone(),
            Vec::new(),
            Some(region),
        ))?;
        resp.mask
    };

    let chain = EvidenceChain::new(clues, Some(region), boxes, missing, mask)
        .expect("chain assembled by the pipeline has region-backed evidence");

    let summary_chain = match cfg.summarize_with {
        // the wire carries no config, so "boxes" prunes the mask from the
        // chain copy the summarizer sees; the final answer keeps it
        SummarizeWith::Boxes => EvidenceChain {
            mask: None,
            ..chain.clone()
        },
        SummarizeWith::Mask | SummarizeWith::Both => chain.clone(),
    };
    let summary = runner.call(AdapterRequest::summarize(query.clone(), summary_chain))?;

    Ok(
        FinalAnswer::new(summary.raw_text, Mode::Slow, Some(chain), 0.0)
            .expect("slow answer with chain is valid"),
    )
}
