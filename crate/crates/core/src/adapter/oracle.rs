//! Scene-graph oracle: a rule-driven implementation of every adapter role,
//! used as ground truth in tests and demos.
//!
//! A scene lists the objects actually in an image with their boxes,
//! attributes and a location clue. The oracle answers a small question
//! grammar from that data; whether it answers directly or refuses and hands
//! back missing objects follows the visibility threshold rule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AdapterBackend, AdapterError, AdapterRequest, AdapterResponse, AdapterRole};
use crate::model::{BBox, Mask, ModelError, Query, Region};

/// The refusal prefix the oracle emits; lowercases to the default trigger.
pub const REFUSAL_PREFIX: &str = "Sorry, I can not answer.";

/// One annotated object in a scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    pub bbox: BBox,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    pub clue: String,
}

/// Ground truth for one image.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSceneGraph")]
pub struct SceneGraph {
    pub image_w: u32,
    pub image_h: u32,
    pub objects: Vec<SceneObject>,
}

#[derive(Deserialize)]
struct RawSceneGraph {
    image_w: u32,
    image_h: u32,
    #[serde(default)]
    objects: Vec<SceneObject>,
}

impl TryFrom<RawSceneGraph> for SceneGraph {
    type Error = ModelError;

    fn try_from(raw: RawSceneGraph) -> Result<Self, Self::Error> {
        SceneGraph::new(raw.image_w, raw.image_h, raw.objects)
    }
}

impl SceneGraph {
    pub fn new(
        image_w: u32,
        image_h: u32,
        objects: Vec<SceneObject>,
    ) -> Result<Self, ModelError> {
        let mut seen = std::collections::BTreeSet::new();
        for obj in &objects {
            if obj.bbox.image_w() != image_w || obj.bbox.image_h() != image_h {
                return Err(ModelError::Invalid {
                    field: "objects",
                    reason: format!(
                        "bbox of {:?} carries image size {}x{}, scene is {image_w}x{image_h}",
                        obj.label,
                        obj.bbox.image_w(),
                        obj.bbox.image_h()
                    ),
                });
            }
            if !seen.insert(obj.label.to_lowercase()) {
                return Err(ModelError::Invalid {
                    field: "objects",
                    reason: format!("duplicate label {:?}", obj.label),
                });
            }
        }
        Ok(Self {
            image_w,
            image_h,
            objects,
        })
    }

    pub fn find(&self, label: &str) -> Option<&SceneObject> {
        let needle = label.to_lowercase();
        self.objects.iter().find(|o| o.label.to_lowercase() == needle)
    }

    /// Longest scene label occurring in the text, if any.
    fn label_in_text(&self, text: &str) -> Option<&SceneObject> {
        let lower = text.to_lowercase();
        self.objects
            .iter()
            .filter(|o| contains_word(&lower, &o.label.to_lowercase()))
            .max_by_key(|o| o.label.len())
    }
}

/// Named scenes, keyed by image_ref. This is the scene file format.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SceneSet(pub BTreeMap<String, SceneGraph>);

impl SceneSet {
    pub fn from_json(json: &str) -> Result<Self, AdapterError> {
        serde_json::from_str(json).map_err(|e| AdapterError::Parse(format!("scene file: {e}")))
    }

    pub fn get(&self, image_ref: &str) -> Option<&SceneGraph> {
        self.0.get(image_ref)
    }

    pub fn insert(&mut self, image_ref: impl Into<String>, scene: SceneGraph) {
        self.0.insert(image_ref.into(), scene);
    }
}

/// Question forms the oracle understands.
#[derive(Debug, Clone, PartialEq, Eq)]
enum OracleQuestion {
    /// "What <attr> is the <label>?"
    Attribute { attr: String, label: String },
    /// "Where is the <label>?"
    Location { label: String },
    /// "Is there a/an <label> (in the image)?"
    Presence { label: String },
}

impl OracleQuestion {
    fn target_label(&self) -> &str {
        match self {
            OracleQuestion::Attribute { label, .. }
            | OracleQuestion::Location { label }
            | OracleQuestion::Presence { label } => label,
        }
    }
}

fn parse_question(question: &str) -> Result<OracleQuestion, AdapterError> {
    let q = question
        .trim()
        .trim_end_matches(['?', '.', '!'])
        .to_lowercase();
    if let Some(rest) = q.strip_prefix("where is the ") {
        return Ok(OracleQuestion::Location {
            label: rest.trim().to_string(),
        });
    }
    if let Some(rest) = q.strip_prefix("is there a ").or_else(|| q.strip_prefix("is there an ")) {
        let label = rest
            .strip_suffix(" in the image")
            .unwrap_or(rest)
            .trim()
            .to_string();
        return Ok(OracleQuestion::Presence { label });
    }
    if let Some(rest) = q.strip_prefix("what ") {
        if let Some(split) = rest.find(" is the ") {
            let attr = rest[..split].trim().to_string();
            let label = rest[split + " is the ".len()..].trim().to_string();
            if !attr.is_empty() && !label.is_empty() {
                return Ok(OracleQuestion::Attribute { attr, label });
            }
        }
    }
    Err(AdapterError::UnsupportedQuestion(format!(
        "question {question:?} is outside the oracle grammar"
    )))
}

fn contains_word(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let mut start = 0;
    while let Some(pos) = haystack[start..].find(needle) {
        let at = start + pos;
        let end = at + needle.len();
        let before_ok = at == 0
            || !haystack[..at]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric());
        let after_ok = end == haystack.len()
            || !haystack[end..].chars().next().is_some_and(|c| c.is_alphanumeric());
        if before_ok && after_ok {
            return true;
        }
        start = at + 1;
    }
    false
}

/// Rule-based backend over a [`SceneSet`].
pub struct OracleBackend {
    scenes: SceneSet,
    threshold_w: u32,
    threshold_h: u32,
    padding: f64,
}

impl OracleBackend {
    pub fn new(scenes: SceneSet, threshold_w: u32, threshold_h: u32) -> Self {
        Self {
            scenes,
            threshold_w,
            threshold_h,
            padding: 0.10,
        }
    }

    fn scene(&self, query: &Query) -> Result<&SceneGraph, AdapterError> {
        self.scenes
            .get(&query.image_ref)
            .ok_or_else(|| AdapterError::Backend(format!("unknown image_ref {:?}", query.image_ref)))
    }

    /// The ground-truth answer, independent of thinking mode.
    fn answer(&self, scene: &SceneGraph, parsed: &OracleQuestion) -> Result<String, AdapterError> {
        match parsed {
            OracleQuestion::Presence { label } => {
                Ok(if scene.find(label).is_some() { "yes" } else { "no" }.to_string())
            }
            OracleQuestion::Location { label } => {
                let obj = scene.find(label).ok_or_else(|| {
                    AdapterError::Backend(format!("object {label:?} is not in the scene"))
                })?;
                Ok(obj.clue.clone())
            }
            OracleQuestion::Attribute { attr, label } => {
                let obj = scene.find(label).ok_or_else(|| {
                    AdapterError::Backend(format!("object {label:?} is not in the scene"))
                })?;
                obj.attributes.get(attr).cloned().ok_or_else(|| {
                    AdapterError::UnsupportedQuestion(format!(
                        "object {label:?} has no attribute {attr:?}"
                    ))
                })
            }
        }
    }

    fn switch(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let scene = self.scene(&req.query)?;
        let parsed = parse_question(&req.query.question)?;
        let target = parsed.target_label();
        let raw_text = match scene.find(target) {
            Some(obj) if !obj.bbox.is_sub_threshold(self.threshold_w, self.threshold_h) => {
                self.answer(scene, &parsed)?
            }
            Some(obj) => format!(
                "{REFUSAL_PREFIX} Missing objects: [{}]. Context: {}",
                obj.label, obj.clue
            ),
            None => format!("{REFUSAL_PREFIX} Missing objects: [{target}]."),
        };
        Ok(AdapterResponse::text(AdapterRole::Switch, raw_text))
    }

    fn propose_region(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let scene = self.scene(&req.query)?;
        let parsed = parse_question(&req.query.question)?;
        let target = scene.find(parsed.target_label());
        let anchor = req
            .clues
            .iter()
            .find_map(|clue| scene.label_in_text(&clue.text));

        let base = anchor.or(target);
        let region = match base {
            Some(obj) => {
                let mut region = obj.bbox.to_region().padded(self.padding);
                if let Some(t) = target {
                    region = region.envelope(&t.bbox.to_region());
                }
                region
            }
            None => Region::full(),
        };
        Ok(
            AdapterResponse::text(AdapterRole::ProposeRegion, super::format_region(&region))
                .with_region(region),
        )
    }

    fn propose_boxes(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let scene = self.scene(&req.query)?;
        let parsed = parse_question(&req.query.question)?;
        let boxes: Vec<BBox> = scene
            .find(parsed.target_label())
            .map(|obj| vec![obj.bbox])
            .unwrap_or_default();
        let raw_text = format!("{} boxes", boxes.len());
        Ok(AdapterResponse::text(AdapterRole::ProposeBoxes, raw_text).with_boxes(boxes))
    }

    fn segment(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let scene = self.scene(&req.query)?;
        let label = &req
            .missing
            .first()
            .ok_or_else(|| AdapterError::Backend("segment request carried no target".into()))?
            .label;
        let obj = scene.find(label).ok_or_else(|| {
            AdapterError::Backend(format!("object {label:?} is not in the scene"))
        })?;
        let mask = Mask::from_bbox(&obj.bbox);
        Ok(AdapterResponse::text(AdapterRole::Segment, format!("mask for {label}")).with_mask(mask))
    }

    fn summarize(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let scene = self.scene(&req.query)?;
        let parsed = parse_question(&req.query.question)?;
        let answer = self.answer(scene, &parsed)?;
        Ok(AdapterResponse::text(AdapterRole::Summarize, answer))
    }
}

impl AdapterBackend for OracleBackend {
    fn call(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        let start = std::time::Instant::now();
        let mut resp = match req.role {
            AdapterRole::Switch => self.switch(req),
            AdapterRole::ProposeRegion => self.propose_region(req),
            AdapterRole::ProposeBoxes => self.propose_boxes(req),
            AdapterRole::Segment => self.segment(req),
            AdapterRole::Summarize => self.summarize(req),
        }?;
        resp.latency_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(resp)
    }

    fn name(&self) -> &str {
        "oracle"
    }
}
