//! Adapter roles, the wire protocol types, and the pluggable backends.
//!
//! Every adapter is reached through one generic call: a request names the
//! role and carries whatever evidence the step has so far, the response
//! carries the role-appropriate payload. Three interchangeable backends
//! implement the call: a remote HTTP client, scripted fixtures, and a
//! scene-graph oracle used as ground truth in tests.

mod fixture;
mod oracle;
mod remote;
mod server;

pub use fixture::FixtureBackend;
pub use oracle::{OracleBackend, SceneGraph, SceneObject, SceneSet};
pub use remote::{RemoteBackend, RemoteConfig};
pub use server::{serve_forever, MockServer};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BBox, ContextClue, EvidenceChain, Mask, MissingObject, Query, Region};

/// Path every backend serves the protocol on.
pub const ADAPTER_PATH: &str = "/v1/adapter";

#[derive(Debug, Error)]
pub enum AdapterError {
    /// Transient transport problem; safe to retry.
    #[error("transport error: {0}")]
    Transport(String),
    /// The request or response violates the protocol; never retried.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// The backend itself reported a failure.
    #[error("backend error: {0}")]
    Backend(String),
    /// The scene oracle cannot interpret the question.
    #[error("unsupported question: {0}")]
    UnsupportedQuestion(String),
    /// A textual payload failed to parse.
    #[error("parse error: {0}")]
    Parse(String),
    /// A parsed payload is geometrically impossible.
    #[error("geometry error: {0}")]
    Geometry(String),
}

impl AdapterError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, AdapterError::Transport(_))
    }
}

/// The five jobs an adapter service can be asked to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum AdapterRole {
    Switch,
    ProposeRegion,
    ProposeBoxes,
    Segment,
    Summarize,
}

impl std::fmt::Display for AdapterRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            AdapterRole::Switch => "switch",
            AdapterRole::ProposeRegion => "propose_region",
            AdapterRole::ProposeBoxes => "propose_boxes",
            AdapterRole::Segment => "segment",
            AdapterRole::Summarize => "summarize",
        };
        write!(f, "{name}")
    }
}

/// One call to an adapter. Optionals are omitted on the wire when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub role: AdapterRole,
    pub query: Query,
    #[serde(default)]
    pub clues: Vec<ContextClue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default)]
    pub boxes: Vec<BBox>,
    #[serde(default)]
    pub missing: Vec<MissingObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<EvidenceChain>,
}

impl AdapterRequest {
    pub fn switch(query: Query) -> Self {
        Self {
            role: AdapterRole::Switch,
            query,
            clues: Vec::new(),
            region: None,
            boxes: Vec::new(),
            missing: Vec::new(),
            chain: None,
        }
    }

    pub fn propose_region(query: Query, clues: Vec<ContextClue>) -> Self {
        Self {
            clues,
            ..Self::switch(query).with_role(AdapterRole::ProposeRegion)
        }
    }

    pub fn propose_boxes(query: Query, clues: Vec<ContextClue>, region: Region) -> Self {
        Self {
            clues,
            region: Some(region),
            ..Self::switch(query).with_role(AdapterRole::ProposeBoxes)
        }
    }

    /// Segment from boxes (two-stage proposals) or from a region (single-stage).
    pub fn segment(
        query: Query,
        missing: Vec<MissingObject>,
        boxes: Vec<BBox>,
        region: Option<Region>,
    ) -> Self {
        Self {
            missing,
            boxes,
            region,
            ..Self::switch(query).with_role(AdapterRole::Segment)
        }
    }

    pub fn summarize(query: Query, chain: EvidenceChain) -> Self {
        Self {
            chain: Some(chain),
            ..Self::switch(query).with_role(AdapterRole::Summarize)
        }
    }

    fn with_role(mut self, role: AdapterRole) -> Self {
        self.role = role;
        self
    }

    /// Checks the fields the role needs are present.
    pub fn validate(&self) -> Result<(), AdapterError> {
        match self.role {
            AdapterRole::Switch | AdapterRole::ProposeRegion => Ok(()),
            AdapterRole::ProposeBoxes => {
                if self.region.is_none() {
                    return Err(AdapterError::Protocol(
                        "propose_boxes request requires a region".into(),
                    ));
                }
                Ok(())
            }
            AdapterRole::Segment => {
                if self.missing.is_empty() {
                    return Err(AdapterError::Protocol(
                        "segment request requires missing objects".into(),
                    ));
                }
                if self.boxes.is_empty() && self.region.is_none() {
                    return Err(AdapterError::Protocol(
                        "segment request requires boxes or a region".into(),
                    ));
                }
                Ok(())
            }
            AdapterRole::Summarize => {
                if self.chain.is_none() {
                    return Err(AdapterError::Protocol(
                        "summarize request requires a chain".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// An adapter's reply. Payload shape depends on the role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub role: AdapterRole,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default)]
    pub boxes: Vec<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
    pub latency_ms: f64,
}

impl AdapterResponse {
    pub fn text(role: AdapterRole, raw_text: impl Into<String>) -> Self {
        Self {
            role,
            raw_text: raw_text.into(),
            region: None,
            boxes: Vec::new(),
            mask: None,
            latency_ms: 0.0,
        }
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = Some(region);
        self
    }

    pub fn with_boxes(mut self, boxes: Vec<BBox>) -> Self {
        self.boxes = boxes;
        self
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_latency(mut self, latency_ms: f64) -> Self {
        self.latency_ms = latency_ms;
        self
    }

    /// Checks the payload matches the role that was asked for.
    pub fn validate_for(&self, requested: AdapterRole) -> Result<(), AdapterError> {
        if self.role != requested {
            return Err(AdapterError::Protocol(format!(
                "response role {} does not match requested role {requested}",
                self.role
            )));
        }
        if !self.latency_ms.is_finite() || self.latency_ms < 0.0 {
            return Err(AdapterError::Protocol(format!(
                "latency_ms must be a non-negative number, got {}",
                self.latency_ms
            )));
        }
        match requested {
            AdapterRole::Switch | AdapterRole::Summarize => {
                if self.raw_text.is_empty() {
                    return Err(AdapterError::Protocol(format!(
                        "{requested} response must carry raw_text"
                    )));
                }
            }
            AdapterRole::ProposeRegion => {
                if self.region.is_none() {
                    return Err(AdapterError::Protocol(
                        "propose_region response must carry a region".into(),
                    ));
                }
            }
            AdapterRole::Segment => {
                if self.mask.is_none() {
                    return Err(AdapterError::Protocol(
                        "segment response must carry a mask".into(),
                    ));
                }
            }
            AdapterRole::ProposeBoxes => {} // an empty box list means "found nothing"
        }
        Ok(())
    }
}

/// Anything that can answer adapter requests. Implementations must be safe
/// to share across concurrently running queries.
pub trait AdapterBackend: Send + Sync {
    fn call(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError>;

    /// Short name used in traces and diagnostics.
    fn name(&self) -> &str {
        "backend"
    }
}

/// Validated round trip to a backend: checks the request before sending and
/// the response payload after.
pub fn call_adapter(
    backend: &dyn AdapterBackend,
    req: &AdapterRequest,
) -> Result<AdapterResponse, AdapterError> {
    req.validate()?;
    let resp = backend.call(req)?;
    resp.validate_for(req.role)?;
    Ok(resp)
}

/// Parses a proposal answer of the form `[left, right, top, bottom]` with
/// normalized bounds, tolerating surrounding prose.
pub fn parse_region_text(raw: &str) -> Result<Region, AdapterError> {
    let open = raw
        .find('[')
        .ok_or_else(|| AdapterError::Parse(format!("no '[' in proposal answer: {raw:?}")))?;
    let close = raw[open..]
        .find(']')
        .map(|i| open + i)
        .ok_or_else(|| AdapterError::Parse(format!("no closing ']' in proposal answer: {raw:?}")))?;
    let parts: Vec<&str> = raw[open + 1..close].split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(AdapterError::Parse(format!(
            "expected 4 comma-separated bounds, got {}",
            parts.len()
        )));
    }
    let mut vals = [0.0f64; 4];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part
            .parse::<f64>()
            .map_err(|e| AdapterError::Parse(format!("bad bound {part:?}: {e}")))?;
    }
    let [left, right, top, bottom] = vals;
    Region::new(left, right, top, bottom).map_err(|e| AdapterError::Geometry(e.to_string()))
}

/// Prints a region in the proposal answer format at 4 decimal places.
pub fn format_region(region: &Region) -> String {
    format!(
        "[{:.4}, {:.4}, {:.4}, {:.4}]",
        region.left(),
        region.right(),
        region.top(),
        region.bottom()
    )
}
