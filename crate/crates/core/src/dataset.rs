//! Switching-friendly negative dataset construction: absence and
//! invisibility triples from object-annotated images, plus region-proposal
//! prompt/answer records.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BBox, ContextClue, MissingObject, ModelError};
use crate::pipeline::DEFAULT_TRIGGER_PHRASE;

/// Default invisibility threshold, pixels, per dimension.
pub const DEFAULT_THRESHOLD_W: u32 = 20;
pub const DEFAULT_THRESHOLD_H: u32 = 20;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid annotations: {0}")]
    Invalid(String),
    #[error("invalid templates: {0}")]
    Template(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Visible,
    Invisible,
}

/// An object is invisible when both dimensions are strictly below the
/// thresholds. This wraps the single rule on [`BBox`] and rejects
/// non-positive thresholds.
pub fn classify_visibility(
    bbox: &BBox,
    threshold_w: u32,
    threshold_h: u32,
) -> Result<Visibility, DatasetError> {
    if threshold_w == 0 || threshold_h == 0 {
        return Err(DatasetError::Config(format!(
            "thresholds must be positive, got {threshold_w}x{threshold_h}"
        )));
    }
    Ok(if bbox.is_sub_threshold(threshold_w, threshold_h) {
        Visibility::Invisible
    } else {
        Visibility::Visible
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotatedObject {
    pub label: String,
    pub bbox: BBox,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawAnnotatedImage")]
pub struct AnnotatedImage {
    pub image_ref: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<AnnotatedObject>,
}

#[derive(Deserialize)]
struct RawAnnotatedImage {
    image_ref: String,
    width: u32,
    height: u32,
    #[serde(default)]
    objects: Vec<AnnotatedObject>,
}

impl TryFrom<RawAnnotatedImage> for AnnotatedImage {
    type Error = ModelError;

    fn try_from(raw: RawAnnotatedImage) -> Result<Self, Self::Error> {
        AnnotatedImage::new(raw.image_ref, raw.width, raw.height, raw.objects)
    }
}

impl AnnotatedImage {
    pub fn new(
        image_ref: String,
        width: u32,
        height: u32,
        objects: Vec<AnnotatedObject>,
    ) -> Result<Self, ModelError> {
        for obj in &objects {
            if obj.bbox.image_w() != width || obj.bbox.image_h() != height {
                return Err(ModelError::Invalid {
                    field: "objects",
                    reason: format!(
                        "bbox of {:?} in {image_ref:?} carries image size {}x{}, image is {width}x{height}",
                        obj.label,
                        obj.bbox.image_w(),
                        obj.bbox.image_h()
                    ),
                });
            }
        }
        Ok(Self {
            image_ref,
            width,
            height,
            objects,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub images: Vec<AnnotatedImage>,
}

impl AnnotationSet {
    pub fn from_json(json: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(json).map_err(|e| DatasetError::Parse(format!("annotations: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Negativity {
    Absent,
    Invisible,
    Positive,
}

/// One dataset entry with its negativity provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub image_ref: String,
    pub question: String,
    pub answer: String,
    pub negativity: Negativity,
    #[serde(default)]
    pub missing: Vec<MissingObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clue: Option<ContextClue>,
}

impl TripleRecord {
    /// Negative triples must carry missing objects and embed the trigger.
    pub fn check_negative_invariant(&self, trigger: &str) -> Result<(), DatasetError> {
        if self.negativity == Negativity::Positive {
            return Ok(());
        }
        if self.missing.is_empty() {
            return Err(DatasetError::Invalid(format!(
                "negative triple for {:?} has no missing objects",
                self.image_ref
            )));
        }
        if !self.answer.to_lowercase().contains(&trigger.to_lowercase()) {
            return Err(DatasetError::Invalid(format!(
                "negative triple answer {:?} does not contain the trigger phrase",
                self.answer
            )));
        }
        Ok(())
    }
}

/// Question/answer phrasing, swappable without rebuilds. Placeholders:
/// `{label}`, `{missing}`, `{clue}`, `{question}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateSet {
    pub absent_questions: Vec<String>,
    pub invisible_questions: Vec<String>,
    pub negative_answer: String,
    pub negative_answer_no_clue: String,
    pub clue_format: String,
    pub proposal_question: String,
    pub proposal_prompt: String,
    pub proposal_clue_fallback: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            absent_questions: vec!["Is there a {label} in the image?".into()],
            invisible_questions: vec!["What color is the {label}?".into()],
            negative_answer:
                "Sorry, I can not answer. Missing objects: [{missing}]. Context: {clue}".into(),
            negative_answer_no_clue: "Sorry, I can not answer. Missing objects: [{missing}].".into(),
            clue_format: "near the {label}".into(),
            proposal_question: "Where is the {label}?".into(),
            proposal_prompt: "<Image>\nTo answer the question: {question},\nwhere is the region of interest in the image based on {clue}?"
                .into(),
            proposal_clue_fallback: "in the image".into(),
        }
    }
}

impl TemplateSet {
    pub fn from_json(json: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(json).map_err(|e| DatasetError::Parse(format!("templates: {e}")))
    }

    pub fn validate(&self, trigger: &str) -> Result<(), DatasetError> {
        if self.absent_questions.is_empty() || self.invisible_questions.is_empty() {
            return Err(DatasetError::Template(
                "absent and invisible question templates must be non-empty".into(),
            ));
        }
        for list in [&self.absent_questions, &self.invisible_questions] {
            for template in list {
                if !template.contains("{label}") {
                    return Err(DatasetError::Template(format!(
                        "question template {template:?} lacks the {{label}} slot"
                    )));
                }
            }
        }
        let trigger = trigger.to_lowercase();
        for answer in [&self.negative_answer, &self.negative_answer_no_clue] {
            if !answer.to_lowercase().contains(&trigger) {
                return Err(DatasetError::Template(format!(
                    "answer template {answer:?} does not contain the trigger phrase"
                )));
            }
        }
        if !self.negative_answer.contains("{clue}") {
            return Err(DatasetError::Template(
                "negative_answer lacks the {clue} slot".into(),
            ));
        }
        for slot in ["{question}", "{clue}"] {
            if !self.proposal_prompt.contains(slot) {
                return Err(DatasetError::Template(format!(
                    "proposal_prompt lacks the {slot} slot"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BuilderConfig {
    pub threshold_w: u32,
    pub threshold_h: u32,
    /// Absent-object triples sampled per image from the vocabulary.
    pub absent_per_image: usize,
    pub seed: u64,
    pub trigger_phrase: String,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        Self {
            threshold_w: DEFAULT_THRESHOLD_W,
            threshold_h: DEFAULT_THRESHOLD_H,
            absent_per_image: 1,
            seed: 0,
            trigger_phrase: DEFAULT_TRIGGER_PHRASE.to_string(),
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in s.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn fill(template: &str, pairs: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (slot, value) in pairs {
        out = out.replace(slot, value);
    }
    out
}

fn center_distance(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

/// Nearest object to `target` among `candidates` by center distance, ties
/// broken by label for determinism.
fn nearest<'a>(
    target: &BBox,
    candidates: impl Iterator<Item = &'a AnnotatedObject>,
) -> Option<&'a AnnotatedObject> {
    candidates.min_by(|a, b| {
        center_distance(target, &a.bbox)
            .partial_cmp(&center_distance(target, &b.bbox))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.label.cmp(&b.label))
    })
}

/// Builds the negative dataset: one absence triple per sampled vocabulary
/// label missing from the image, one invisibility triple per sub-threshold
/// object. Output is sorted by (image_ref, first missing label, negativity).
pub fn build_negative_triples(
    annotations: &AnnotationSet,
    vocab: &[String],
    templates: &TemplateSet,
    cfg: &BuilderConfig,
) -> Result<Vec<TripleRecord>, DatasetError> {
    if vocab.is_empty() {
        return Err(DatasetError::Config("vocabulary must be non-empty".into()));
    }
    if cfg.threshold_w == 0 || cfg.threshold_h == 0 {
        return Err(DatasetError::Config(format!(
            "thresholds must be positive, got {}x{}",
            cfg.threshold_w, cfg.threshold_h
        )));
    }
    templates.validate(&cfg.trigger_phrase)?;

    let mut triples = Vec::new();
    for image in &annotations.images {
        // per-image stream so results do not depend on image order
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fnv1a(&image.image_ref));

        let visible: Vec<&AnnotatedObject> = image
            .objects
            .iter()
            .filter(|o| !o.bbox.is_sub_threshold(cfg.threshold_w, cfg.threshold_h))
            .collect();
        if visible.is_empty() && !image.objects.is_empty() {
            tracing::warn!(
                image_ref = %image.image_ref,
                "no visible object to anchor clues; emitting clueless triples"
            );
        }

        // absence triples from vocabulary labels not present in the image
        let present: BTreeSet<String> = image
            .objects
            .iter()
            .map(|o| o.label.to_lowercase())
            .collect();
        let mut candidates: Vec<&String> = vocab
            .iter()
            .filter(|label| !present.contains(&label.to_lowercase()))
            .collect();
        candidates.sort();
        candidates.dedup();
        let mut sampled: Vec<&String> = candidates
            .choose_multiple(&mut rng, cfg.absent_per_image)
            .copied()
            .collect();
        sampled.sort();
        for label in sampled {
            let question_template = templates
                .absent_questions
                .choose(&mut rng)
                .expect("validated non-empty");
            let question = fill(question_template, &[("{label}", label)]);
            let answer = fill(&templates.negative_answer_no_clue, &[("{missing}", label)]);
            let triple = TripleRecord {
                image_ref: image.image_ref.clone(),
                question,
                answer,
                negativity: Negativity::Absent,
                missing: vec![MissingObject::new(label.clone())
                    .map_err(|e| DatasetError::Invalid(e.to_string()))?],
                clue: None,
            };
            triple.check_negative_invariant(&cfg.trigger_phrase)?;
            triples.push(triple);
        }

        // invisibility triples for sub-threshold objects
        for obj in &image.objects {
            if classify_visibility(&obj.bbox, cfg.threshold_w, cfg.threshold_h)?
                == Visibility::Visible
            {
                continue;
            }
            let anchor = nearest(
                &obj.bbox,
                visible
                    .iter()
                    .copied()
                    .filter(|v| v.label != obj.label),
            );
            let clue = anchor.map(|a| fill(&templates.clue_format, &[("{label}", &a.label)]));
            let question_template = templates
                .invisible_questions
                .choose(&mut rng)
                .expect("validated non-empty");
            let question = fill(question_template, &[("{label}", &obj.label)]);
            let answer = match &clue {
                Some(clue_text) => fill(
                    &templates.negative_answer,
                    &[("{missing}", obj.label.as_str()), ("{clue}", clue_text)],
                ),
                None => fill(
                    &templates.negative_answer_no_clue,
                    &[("{missing}", obj.label.as_str())],
                ),
            };
            let triple = TripleRecord {
                image_ref: image.image_ref.clone(),
                question,
                answer,
                negativity: Negativity::Invisible,
                missing: vec![MissingObject::new(obj.label.clone())
                    .map_err(|e| DatasetError::Invalid(e.to_string()))?],
                clue: clue
                    .map(ContextClue::new)
                    .transpose()
                    .map_err(|e| DatasetError::Invalid(e.to_string()))?,
            };
            triple.check_negative_invariant(&cfg.trigger_phrase)?;
            triples.push(triple);
        }
    }

    triples.sort_by(|a, b| {
        (&a.image_ref, &a.missing[0].label, a.negativity).cmp(&(
            &b.image_ref,
            &b.missing[0].label,
            b.negativity,
        ))
    });
    Ok(triples)
}

/// Region-proposal training record: a templated prompt and the bracketed
/// normalized bounds of the target object at 4 decimal places.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub prompt: String,
    pub answer: String,
    pub image_ref: String,
}

/// Formats the proposal answer: `[left, right, top, bottom]` at 4 decimals.
pub fn proposal_answer(bbox: &BBox) -> String {
    let region = bbox.to_region();
    crate::adapter::format_region(&region)
}

/// One proposal record per annotated object, sorted by (image_ref, label).
/// The prompt's clue comes from the nearest other object, or a fixed
/// fallback for single-object images.
pub fn build_proposal_records(
    annotations: &AnnotationSet,
    templates: &TemplateSet,
) -> Result<Vec<ProposalRecord>, DatasetError> {
    templates.validate(DEFAULT_TRIGGER_PHRASE)?;
    let mut records = Vec::new();
    for image in &annotations.images {
        let mut objects: Vec<&AnnotatedObject> = image.objects.iter().collect();
        objects.sort_by(|a, b| a.label.cmp(&b.label));
        for obj in objects {
            let neighbor = nearest(
                &obj.bbox,
                image.objects.iter().filter(|o| o.label != obj.label),
            );
            let clue = neighbor
                .map(|n| fill(&templates.clue_format, &[("{label}", &n.label)]))
                .unwrap_or_else(|| templates.proposal_clue_fallback.clone());
            let question = fill(&templates.proposal_question, &[("{label}", &obj.label)]);
            let prompt = fill(
                &templates.proposal_prompt,
                &[("{question}", question.as_str()), ("{clue}", clue.as_str())],
            );
            records.push(ProposalRecord {
                prompt,
                answer: proposal_answer(&obj.bbox),
                image_ref: image.image_ref.clone(),
            });
        }
    }
    Ok(records)
}

/// Serializes records as JSON Lines.
pub fn triples_to_jsonl(triples: &[TripleRecord]) -> String {
    let mut out = String::new();
    for triple in triples {
        out.push_str(&serde_json::to_string(triple).expect("triple serializes"));
        out.push('\n');
    }
    out
}

pub fn proposals_to_jsonl(records: &[ProposalRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}
