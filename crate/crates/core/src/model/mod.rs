//! Domain types shared by every module, with their canonical JSON encodings.
//!
//! Field names in the serialized forms are part of the wire protocol and the
//! trace file formats; optional fields are omitted when absent, never null.

mod geometry;
mod mask;

pub use geometry::{BBox, Region};
pub use mask::Mask;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid geometry in {field}: {reason}")]
    Geometry { field: &'static str, reason: String },
    #[error("invalid mask: {reason}")]
    Mask { reason: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
}

/// One visual question addressed to the engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawQuery")]
pub struct Query {
    pub image_ref: String,
    pub question: String,
    pub query_id: String,
}

#[derive(Deserialize)]
struct RawQuery {
    image_ref: String,
    question: String,
    query_id: String,
}

impl TryFrom<RawQuery> for Query {
    type Error = ModelError;

    fn try_from(raw: RawQuery) -> Result<Self, Self::Error> {
        Query::new(raw.image_ref, raw.question, raw.query_id)
    }
}

impl Query {
    pub fn new(
        image_ref: impl Into<String>,
        question: impl Into<String>,
        query_id: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let question = question.into();
        if question.trim().is_empty() {
            return Err(ModelError::Invalid {
                field: "question",
                reason: "must be non-empty".into(),
            });
        }
        Ok(Self {
            image_ref: image_ref.into(),
            question,
            query_id: query_id.into(),
        })
    }
}

/// Free-form hint about where a missing object probably is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawText")]
pub struct ContextClue {
    pub text: String,
}

#[derive(Deserialize)]
struct RawText {
    text: String,
}

impl TryFrom<RawText> for ContextClue {
    type Error = ModelError;

    fn try_from(raw: RawText) -> Result<Self, Self::Error> {
        ContextClue::new(raw.text)
    }
}

impl ContextClue {
    pub fn new(text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::Invalid {
                field: "clue",
                reason: "must be non-empty".into(),
            });
        }
        Ok(Self { text })
    }
}

/// An object the switch adapter believes the question needs but the image
/// does not readily show.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLabel")]
pub struct MissingObject {
    pub label: String,
}

#[derive(Deserialize)]
struct RawLabel {
    label: String,
}

impl TryFrom<RawLabel> for MissingObject {
    type Error = ModelError;

    fn try_from(raw: RawLabel) -> Result<Self, Self::Error> {
        MissingObject::new(raw.label)
    }
}

impl MissingObject {
    pub fn new(label: impl Into<String>) -> Result<Self, ModelError> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(ModelError::Invalid {
                field: "missing object",
                reason: "label must be non-empty".into(),
            });
        }
        Ok(Self { label })
    }
}

/// The slow path's accumulated artifacts: clues, a region of interest,
/// candidate boxes, the missing objects, and optionally a pixel mask.
///
/// Structural rules: a mask needs supporting spatial evidence (boxes, or a
/// region in single-stage proposal mode), and boxes need a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "RawChain")]
pub struct EvidenceChain {
    pub clues: Vec<ContextClue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    pub boxes: Vec<BBox>,
    pub missing: Vec<MissingObject>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
}

#[derive(Deserialize)]
struct RawChain {
    #[serde(default)]
    clues: Vec<ContextClue>,
    #[serde(default)]
    region: Option<Region>,
    #[serde(default)]
    boxes: Vec<BBox>,
    #[serde(default)]
    missing: Vec<MissingObject>,
    #[serde(default)]
    mask: Option<Mask>,
}

impl TryFrom<RawChain> for EvidenceChain {
    type Error = ModelError;

    fn try_from(raw: RawChain) -> Result<Self, Self::Error> {
        EvidenceChain::new(raw.clues, raw.region, raw.boxes, raw.missing, raw.mask)
    }
}

impl EvidenceChain {
    pub fn new(
        clues: Vec<ContextClue>,
        region: Option<Region>,
        boxes: Vec<BBox>,
        missing: Vec<MissingObject>,
        mask: Option<Mask>,
    ) -> Result<Self, ModelError> {
        if mask.is_some() && boxes.is_empty() && region.is_none() {
            return Err(ModelError::Invalid {
                field: "mask",
                reason: "a mask requires boxes or a region".into(),
            });
        }
        if !boxes.is_empty() && region.is_none() {
            return Err(ModelError::Invalid {
                field: "boxes",
                reason: "boxes require a region".into(),
            });
        }
        Ok(Self {
            clues,
            region,
            boxes,
            missing,
            mask,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.clues.is_empty()
            && self.region.is_none()
            && self.boxes.is_empty()
            && self.missing.is_empty()
            && self.mask.is_none()
    }
}

/// Which thinking path produced an answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fast,
    Slow,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Fast => write!(f, "fast"),
            Mode::Slow => write!(f, "slow"),
        }
    }
}

/// The engine's answer to one query. Slow answers carry their chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFinalAnswer")]
pub struct FinalAnswer {
    pub text: String,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<EvidenceChain>,
    pub latency_ms: f64,
}

#[derive(Deserialize)]
struct RawFinalAnswer {
    text: String,
    mode: Mode,
    #[serde(default)]
    chain: Option<EvidenceChain>,
    latency_ms: f64,
}

impl TryFrom<RawFinalAnswer> for FinalAnswer {
    type Error = ModelError;

    fn try_from(raw: RawFinalAnswer) -> Result<Self, Self::Error> {
        FinalAnswer::new(raw.text, raw.mode, raw.chain, raw.latency_ms)
    }
}

impl FinalAnswer {
    pub fn new(
        text: String,
        mode: Mode,
        chain: Option<EvidenceChain>,
        latency_ms: f64,
    ) -> Result<Self, ModelError> {
        match (mode, chain.is_some()) {
            (Mode::Slow, false) => Err(ModelError::Invalid {
                field: "chain",
                reason: "slow answers must carry a chain".into(),
            }),
            (Mode::Fast, true) => Err(ModelError::Invalid {
                field: "chain",
                reason: "fast answers must not carry a chain".into(),
            }),
            _ => Ok(Self {
                text,
                mode,
                chain,
                latency_ms,
            }),
        }
    }
}

/// Canonical byte encoding of a chain (UTF-8 JSON).
pub fn serialize_chain(chain: &EvidenceChain) -> Vec<u8> {
    serde_json::to_vec(chain).expect("chain serialization cannot fail")
}

/// Inverse of [`serialize_chain`]; errors name the offending field.
pub fn deserialize_chain(bytes: &[u8]) -> Result<EvidenceChain, ModelError> {
    serde_json::from_slice(bytes).map_err(|e| ModelError::Parse(e.to_string()))
}
