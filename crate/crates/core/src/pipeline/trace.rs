//! Per-query traces: every adapter call with its timing, the evidence chain,
//! and the final outcome, ready for inspection as one JSON document.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::adapter::{AdapterRequest, AdapterResponse, AdapterRole};
use crate::model::{EvidenceChain, Mode};

pub(crate) fn now_ms() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64() * 1e3)
        .unwrap_or(0.0)
}

/// Compact view of a request: enough to see what each step was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub role: AdapterRole,
    pub n_clues: usize,
    pub has_region: bool,
    pub n_boxes: usize,
    pub n_missing: usize,
    pub has_chain: bool,
}

impl From<&AdapterRequest> for RequestSummary {
    fn from(req: &AdapterRequest) -> Self {
        Self {
            role: req.role,
            n_clues: req.clues.len(),
            has_region: req.region.is_some(),
            n_boxes: req.boxes.len(),
            n_missing: req.missing.len(),
            has_chain: req.chain.is_some(),
        }
    }
}

/// Compact view of a response; the raw text is kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSummary {
    pub role: AdapterRole,
    pub raw_text: String,
    pub has_region: bool,
    pub n_boxes: usize,
    pub has_mask: bool,
    pub latency_ms: f64,
}

impl From<&AdapterResponse> for ResponseSummary {
    fn from(resp: &AdapterResponse) -> Self {
        Self {
            role: resp.role,
            raw_text: resp.raw_text.clone(),
            has_region: resp.region.is_some(),
            n_boxes: resp.boxes.len(),
            has_mask: resp.mask.is_some(),
            latency_ms: resp.latency_ms,
        }
    }
}

/// One adapter call as it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: String,
    pub request: RequestSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponseSummary>,
    pub t_start_ms: f64,
    pub t_end_ms: f64,
}

/// The full story of one query, written as `<query_id>.trace.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub query_id: String,
    pub image_ref: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    pub events: Vec<TraceEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<EvidenceChain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: f64,
}

impl QueryTrace {
    pub(crate) fn begin(query: &crate::model::Query) -> Self {
        Self {
            query_id: query.query_id.clone(),
            image_ref: query.image_ref.clone(),
            question: query.question.clone(),
            mode: None,
            degraded: false,
            flags: Vec::new(),
            events: Vec::new(),
            chain: None,
            answer: None,
            error: None,
            latency_ms: 0.0,
        }
    }

    /// Zeroes every wall-clock quantity, leaving only deterministic content.
    pub fn strip_timestamps(&mut self) {
        self.latency_ms = 0.0;
        for event in &mut self.events {
            event.t_start_ms = 0.0;
            event.t_end_ms = 0.0;
            if let Some(resp) = &mut event.response {
                resp.latency_ms = 0.0;
            }
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// Writes `<query_id>.trace.json` under `dir` and returns the path.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let safe_id: String = self
            .query_id
            .chars()
            .map(|c| if c == '/' || c == '\\' { '_' } else { c })
            .collect();
        let path = dir.join(format!("{safe_id}.trace.json"));
        let mut file = std::fs::File::create(&path)?;
        file.write_all(self.to_json_pretty().as_bytes())?;
        file.write_all(b"\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Query;

    #[test]
    fn strip_timestamps_zeroes_all_clocks() {
        let query = Query::new("img", "Is there a cat?", "q1").unwrap();
        let mut trace = QueryTrace::begin(&query);
        trace.latency_ms = 12.5;
        trace.events.push(TraceEvent {
            step: "switch".into(),
            request: RequestSummary {
                role: AdapterRole::Switch,
                n_clues: 0,
                has_region: false,
                n_boxes: 0,
                n_missing: 0,
                has_chain: false,
            },
            response: Some(ResponseSummary {
                role: AdapterRole::Switch,
                raw_text: "yes".into(),
                has_region: false,
                n_boxes: 0,
                has_mask: false,
                latency_ms: 3.0,
            }),
            t_start_ms: 100.0,
            t_end_ms: 103.0,
        });
        trace.strip_timestamps();
        assert_eq!(trace.latency_ms, 0.0);
        assert_eq!(trace.events[0].t_start_ms, 0.0);
        assert_eq!(trace.events[0].t_end_ms, 0.0);
        assert_eq!(trace.events[0].response.as_ref().unwrap().latency_ms, 0.0);
    }

    #[test]
    fn trace_file_name_uses_query_id() {
        let dir = tempfile::tempdir().unwrap();
        let query = Query::new("img", "Is there a cat?", "batch/q1").unwrap();
        let trace = QueryTrace::begin(&query);
        let path = trace.write_to_dir(dir.path()).unwrap();
        assert!(path.ends_with("batch_q1.trace.json"));
        let text = std::fs::read_to_string(&path).unwrap();
        let back: QueryTrace = serde_json::from_str(&text).unwrap();
        assert_eq!(back.query_id, "batch/q1");
    }
}
