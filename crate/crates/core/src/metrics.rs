//! Evaluation metrics: exact-match accuracy, yes/no F1, paired-question
//! accuracy scoring, and the two segmentation IoU variants.
//!
//! All metrics are pure functions over immutable inputs and are invariant to
//! record order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Mask, Mode, ModelError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric undefined on empty input")]
    EmptyInput,
    #[error("record {query_id}: {reason}")]
    Record { query_id: String, reason: String },
    #[error("image {image_ref} has {count} records in subtask {subtask:?}, expected exactly 2")]
    PairStructure {
        image_ref: String,
        subtask: String,
        count: usize,
    },
    #[error("mask pair {image_ref}: {reason}")]
    MaskPair { image_ref: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
}

/// How a query finished: which thinking path, or not at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordMode {
    Fast,
    Slow,
    Failed,
}

impl From<Mode> for RecordMode {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Fast => RecordMode::Fast,
            Mode::Slow => RecordMode::Slow,
        }
    }
}

impl std::fmt::Display for RecordMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecordMode::Fast => write!(f, "fast"),
            RecordMode::Slow => write!(f, "slow"),
            RecordMode::Failed => write!(f, "failed"),
        }
    }
}

/// One scored (or failed) query: the row format of batch outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    pub predicted: String,
    #[serde(default)]
    pub gold: Vec<String>,
    pub mode: RecordMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<String>,
    pub image_ref: String,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Lowercases, trims, and strips terminal punctuation. This is the single
/// normalization applied before any exact-match comparison.
pub fn normalize_answer(s: &str) -> String {
    s.trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .trim_end()
        .to_lowercase()
}

/// True when the normalized prediction equals any normalized gold answer.
pub fn is_correct(record: &EvalRecord) -> bool {
    let predicted = normalize_answer(&record.predicted);
    record
        .gold
        .iter()
        .any(|g| normalize_answer(g) == predicted)
}

fn require_gold(record: &EvalRecord) -> Result<(), MetricsError> {
    if record.gold.is_empty() {
        return Err(MetricsError::Record {
            query_id: record.query_id.clone(),
            reason: "no gold answers; record cannot be scored".into(),
        });
    }
    Ok(())
}

/// Fraction of records whose prediction exactly matches a gold answer after
/// normalization.
pub fn exact_match_accuracy(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut correct = 0u64;
    for record in records {
        require_gold(record)?;
        if is_correct(record) {
            correct += 1;
        }
    }
    Ok(correct as f64 / records.len() as f64)
}

/// Precision/recall/F1 on the "yes" class of a binary yes/no benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopeReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    /// query_ids of records excluded for non-binary answers.
    pub invalid: Vec<String>,
}

pub fn pope_f1(records: &[EvalRecord]) -> Result<PopeReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    let mut invalid = Vec::new();
    for record in records {
        require_gold(record)?;
        let predicted = normalize_answer(&record.predicted);
        let golds: std::collections::BTreeSet<String> =
            record.gold.iter().map(|g| normalize_answer(g)).collect();
        let gold_yes = match (golds.contains("yes"), golds.contains("no")) {
            (true, false) if golds.len() == 1 => true,
            (false, true) if golds.len() == 1 => false,
            _ => {
                invalid.push(record.query_id.clone());
                continue;
            }
        };
        let pred_yes = match predicted.as_str() {
            "yes" => true,
            "no" => false,
            _ => {
                invalid.push(record.query_id.clone());
                continue;
            }
        };
        match (pred_yes, gold_yes) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    invalid.sort(); // report is invariant to record order
    Ok(PopeReport {
        precision,
        recall,
        f1,
        tp,
        fp,
        fn_,
        tn,
        invalid,
    })
}

/// Per-subtask scores of the paired-question benchmark: question-level
/// accuracy, both-questions-per-image accuracy, and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmeSubtaskScore {
    /// Question-level accuracy, percent.
    pub acc: f64,
    /// Fraction of images with both questions correct, percent.
    pub acc_plus: f64,
    /// acc + acc_plus, in [0, 200].
    pub score: f64,
    pub images: u64,
    pub questions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmeReport {
    pub per_subtask: BTreeMap<String, MmeSubtaskScore>,
    /// Sum of subtask scores.
    pub total: f64,
}

pub fn mme_score(records: &[EvalRecord]) -> Result<MmeReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut grouped: BTreeMap<&str, BTreeMap<&str, Vec<&EvalRecord>>> = BTreeMap::new();
    for record in records {
        require_gold(record)?;
        let subtask = record.subtask.as_deref().ok_or_else(|| MetricsError::Record {
            query_id: record.query_id.clone(),
            reason: "missing subtask".into(),
        })?;
        grouped
            .entry(subtask)
            .or_default()
            .entry(record.image_ref.as_str())
            .or_default()
            .push(record);
    }
    let mut per_subtask = BTreeMap::new();
    let mut total = 0.0;
    for (subtask, images) in grouped {
        let mut questions = 0u64;
        let mut correct = 0u64;
        let mut both_correct = 0u64;
        for (image_ref, pair) in &images {
            if pair.len() != 2 {
                return Err(MetricsError::PairStructure {
                    image_ref: image_ref.to_string(),
                    subtask: subtask.to_string(),
                    count: pair.len(),
                });
            }
            let hits = pair.iter().filter(|r| is_correct(r)).count() as u64;
            questions += 2;
            correct += hits;
            if hits == 2 {
                both_correct += 1;
            }
        }
        let image_count = images.len() as u64;
        let acc = 100.0 * correct as f64 / questions as f64;
        let acc_plus = 100.0 * both_correct as f64 / image_count as f64;
        let score = acc + acc_plus;
        total += score;
        per_subtask.insert(
            subtask.to_string(),
            MmeSubtaskScore {
                acc,
                acc_plus,
                score,
                images: image_count,
                questions,
            },
        );
    }
    Ok(MmeReport { per_subtask, total })
}

/// A predicted mask paired with its ground truth for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMaskPair")]
pub struct MaskPair {
    pub predicted: Mask,
    pub gold: Mask,
    pub image_ref: String,
}

#[derive(Deserialize)]
struct RawMaskPair {
    predicted: Mask,
    gold: Mask,
    image_ref: String,
}

impl TryFrom<RawMaskPair> for MaskPair {
    type Error = ModelError;

    fn try_from(raw: RawMaskPair) -> Result<Self, Self::Error> {
        MaskPair::new(raw.predicted, raw.gold, raw.image_ref).map_err(|e| ModelError::Invalid {
            field: "mask pair",
            reason: e.to_string(),
        })
    }
}

impl MaskPair {
    pub fn new(
        predicted: Mask,
        gold: Mask,
        image_ref: impl Into<String>,
    ) -> Result<Self, MetricsError> {
        let image_ref = image_ref.into();
        if predicted.width() != gold.width() || predicted.height() != gold.height() {
            return Err(MetricsError::MaskPair {
                image_ref,
                reason: format!(
                    "predicted is {}x{}, gold is {}x{}",
                    predicted.width(),
                    predicted.height(),
                    gold.width(),
                    gold.height()
                ),
            });
        }
        Ok(Self {
            predicted,
            gold,
            image_ref,
        })
    }

    fn overlap(&self) -> Result<(u64, u64), MetricsError> {
        self.predicted
            .overlap_counts(&self.gold)
            .map_err(|e| MetricsError::MaskPair {
                image_ref: self.image_ref.clone(),
                reason: e.to_string(),
            })
    }
}

/// Entry of a mask-pair manifest file: paths to two canonical mask JSON files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskPairManifestEntry {
    pub image_ref: String,
    pub predicted: String,
    pub gold: String,
}

/// Cumulative intersection over cumulative union across the dataset.
/// Larger objects weigh more; report together with [`giou`].
pub fn ciou(pairs: &[MaskPair]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let (mut inter_sum, mut union_sum) = (0u64, 0u64);
    for pair in pairs {
        let (inter, union) = pair.overlap()?;
        inter_sum += inter;
        union_sum += union;
    }
    if union_sum == 0 {
        return Ok(1.0);
    }
    Ok(inter_sum as f64 / union_sum as f64)
}

/// Mean of per-image IoU; each image counts equally. An image where both
/// masks are empty scores 1.
pub fn giou(pairs: &[MaskPair]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sum = 0.0;
    for pair in pairs {
        let (inter, union) = pair.overlap()?;
        sum += if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
    }
    Ok(sum / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub image_ref: String,
    pub intersection: u64,
    pub union: u64,
    pub iou: f64,
}

/// Both IoU variants plus the per-image intermediates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegReport {
    pub ciou: f64,
    pub giou: f64,
    pub per_image: Vec<PairOverlap>,
}

pub fn seg_report(pairs: &[MaskPair]) -> Result<SegReport, MetricsError> {
    let ciou = ciou(pairs)?;
    let giou = giou(pairs)?;
    let per_image = pairs
        .iter()
        .map(|pair| {
            let (intersection, union) = pair.overlap()?;
            Ok(PairOverlap {
                image_ref: pair.image_ref.clone(),
                intersection,
                union,
                iou: if union == 0 {
                    1.0
                } else {
                    intersection as f64 / union as f64
                },
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    Ok(SegReport {
        ciou,
        giou,
        per_image,
    })
}

/// Parses JSON Lines of [`EvalRecord`]; blank lines are skipped.
pub fn read_records_jsonl(text: &str) -> Result<Vec<EvalRecord>, MetricsError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| MetricsError::Parse(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// One compact JSON object per line, trailing newline included.
pub fn records_to_jsonl(records: &[EvalRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BBox;

    fn record(id: &str, predicted: &str, gold: &[&str]) -> EvalRecord {
        EvalRecord {
            query_id: id.into(),
            predicted: predicted.into(),
            gold: gold.iter().map(|s| s.to_string()).collect(),
            mode: RecordMode::Fast,
            subtask: None,
            image_ref: format!("img-{id}"),
            latency_ms: 1.0,
            trace: None,
            error: None,
            flags: vec![],
        }
    }

    fn paired(subtask: &str, image: &str, id: &str, predicted: &str, gold: &str) -> EvalRecord {
        EvalRecord {
            subtask: Some(subtask.into()),
            image_ref: image.into(),
            ..record(id, predicted, &[gold])
        }
    }

    #[test]
    fn exact_match_counts() {
        let all = vec![
            record("1", "a", &["a"]),
            record("2", "b", &["b"]),
            record("3", "c", &["c"]),
        ];
        assert_eq!(exact_match_accuracy(&all).unwrap(), 1.0);

        let two_thirds = vec![
            record("1", "a", &["a"]),
            record("2", "b", &["x"]),
            record("3", "c", &["c"]),
        ];
        assert!((exact_match_accuracy(&two_thirds).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_match_normalizes() {
        let records = vec![record("1", "Red.", &["red"])];
        assert_eq!(exact_match_accuracy(&records).unwrap(), 1.0);
    }

    #[test]
    fn exact_match_rejects_empty_input_and_goldless_records() {
        assert!(matches!(
            exact_match_accuracy(&[]),
            Err(MetricsError::EmptyInput)
        ));
        let records = vec![record("1", "a", &[])];
        assert!(matches!(
            exact_match_accuracy(&records),
            Err(MetricsError::Record { .. })
        ));
    }

    #[test]
    fn pope_perfect_predictions() {
        let records = vec![
            record("1", "yes", &["yes"]),
            record("2", "no", &["no"]),
            record("3", "yes", &["yes"]),
        ];
        let report = pope_f1(&records).unwrap();
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);
        assert_eq!(report.f1, 1.0);
    }

    #[test]
    fn pope_confusion_matrix_arithmetic() {
        // TP=6, FP=2, FN=2, TN=0
        let mut records = Vec::new();
        for i in 0..6 {
            records.push(record(&format!("tp{i}"), "yes", &["yes"]));
        }
        for i in 0..2 {
            records.push(record(&format!("fp{i}"), "yes", &["no"]));
        }
        for i in 0..2 {
            records.push(record(&format!("fn{i}"), "no", &["yes"]));
        }
        let report = pope_f1(&records).unwrap();
        assert_eq!(report.precision, 0.75);
        assert_eq!(report.recall, 0.75);
        assert_eq!(report.f1, 0.75);
    }

    #[test]
    fn pope_zero_positive_predictions() {
        let records = vec![record("1", "no", &["yes"]), record("2", "no", &["yes"])];
        let report = pope_f1(&records).unwrap();
        assert_eq!(report.f1, 0.0);
        assert_eq!(report.precision, 0.0);
    }

    #[test]
    fn pope_excludes_and_reports_non_binary() {
        let records = vec![
            record("1", "yes", &["yes"]),
            record("2", "maybe", &["no"]),
            record("3", "no", &["blue"]),
        ];
        let report = pope_f1(&records).unwrap();
        assert_eq!(report.invalid, vec!["2".to_string(), "3".to_string()]);
        assert_eq!(report.tp, 1);
    }

    #[test]
    fn mme_small_case_enumeration() {
        // 2 images, 4 questions, 3 correct, 1 image fully correct
        let records = vec![
            paired("existence", "imgA", "1", "yes", "yes"),
            paired("existence", "imgA", "2", "no", "no"),
            paired("existence", "imgB", "3", "yes", "yes"),
            paired("existence", "imgB", "4", "yes", "no"),
        ];
        let report = mme_score(&records).unwrap();
        let sub = &report.per_subtask["existence"];
        assert_eq!(sub.acc, 75.0);
        assert_eq!(sub.acc_plus, 50.0);
        assert_eq!(sub.score, 125.0);
        assert_eq!(report.total, 125.0);
    }

    #[test]
    fn mme_structural_error_names_the_image() {
        let records = vec![
            paired("color", "imgA", "1", "yes", "yes"),
            paired("color", "imgA", "2", "no", "no"),
            paired("color", "imgA", "3", "no", "no"),
            paired("color", "imgB", "4", "no", "no"),
        ];
        let err = mme_score(&records).unwrap_err();
        match err {
            MetricsError::PairStructure {
                image_ref, count, ..
            } => {
                assert_eq!(image_ref, "imgA");
                assert_eq!(count, 3);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn mme_perfect_ten_subtasks_hits_ceiling() {
        let mut records = Vec::new();
        for s in 0..10 {
            for img in 0..5 {
                for q in 0..2 {
                    records.push(paired(
                        &format!("subtask{s}"),
                        &format!("img{s}-{img}"),
                        &format!("{s}-{img}-{q}"),
                        "yes",
                        "yes",
                    ));
                }
            }
        }
        let report = mme_score(&records).unwrap();
        assert_eq!(report.total, 2000.0);
        for sub in report.per_subtask.values() {
            assert_eq!(sub.score, 200.0);
        }
    }

    fn mask_pair(pred: Mask, gold: Mask, name: &str) -> MaskPair {
        MaskPair::new(pred, gold, name).unwrap()
    }

    fn full(w: u32, h: u32) -> Mask {
        Mask::from_bbox(&BBox::new(0, 0, w, h, w, h).unwrap())
    }

    fn empty(w: u32, h: u32) -> Mask {
        Mask::from_rle(w, h, vec![w * h]).unwrap()
    }

    #[test]
    fn ciou_identical_masks() {
        let pairs = vec![
            mask_pair(full(4, 4), full(4, 4), "a"),
            mask_pair(full(2, 3), full(2, 3), "b"),
            mask_pair(empty(2, 2), empty(2, 2), "c"),
        ];
        assert_eq!(ciou(&pairs).unwrap(), 1.0);
        assert_eq!(giou(&pairs).unwrap(), 1.0);
    }

    #[test]
    fn ciou_and_giou_two_image_case() {
        // image A: intersection 4, union 8; image B: intersection 0, union 4
        let a_pred = Mask::from_bbox(&BBox::new(0, 0, 2, 3, 4, 4).unwrap()); // 6 px
        let a_gold = Mask::from_bbox(&BBox::new(0, 1, 2, 4, 4, 4).unwrap()); // 6 px, overlap 4
        let b_pred = Mask::from_bbox(&BBox::new(0, 0, 2, 1, 4, 4).unwrap()); // 2 px
        let b_gold = Mask::from_bbox(&BBox::new(2, 2, 4, 3, 4, 4).unwrap()); // 2 px, disjoint
        let pairs = vec![mask_pair(a_pred, a_gold, "A"), mask_pair(b_pred, b_gold, "B")];
        assert!((ciou(&pairs).unwrap() - 4.0 / 12.0).abs() < 1e-12);
        assert_eq!(giou(&pairs).unwrap(), 0.25);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let pairs = vec![mask_pair(empty(4, 4), full(4, 4), "a")];
        assert_eq!(ciou(&pairs).unwrap(), 0.0);
        assert_eq!(giou(&pairs).unwrap(), 0.0);
    }

    #[test]
    fn single_image_giou_equals_ciou() {
        let pred = Mask::from_bbox(&BBox::new(0, 0, 3, 3, 5, 5).unwrap());
        let gold = Mask::from_bbox(&BBox::new(1, 1, 4, 4, 5, 5).unwrap());
        let pairs = vec![mask_pair(pred, gold, "only")];
        assert_eq!(ciou(&pairs).unwrap(), giou(&pairs).unwrap());
    }

    #[test]
    fn mask_pair_dimension_mismatch_names_image() {
        let err = MaskPair::new(full(2, 2), full(3, 3), "imgX").unwrap_err();
        assert!(err.to_string().contains("imgX"));
    }

    #[test]
    fn records_jsonl_round_trip() {
        let records = vec![record("1", "yes", &["yes"]), record("2", "no", &["yes"])];
        let text = records_to_jsonl(&records);
        assert_eq!(read_records_jsonl(&text).unwrap(), records);
        assert!(read_records_jsonl("{bad json}\n").is_err());
    }
}
