//! Shared generators and independent oracles for the integration suites.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fast_core::adapter::{
    AdapterBackend, AdapterError, AdapterRequest, AdapterResponse, AdapterRole, SceneGraph,
    SceneObject, SceneSet,
};
use fast_core::dataset::{AnnotatedImage, AnnotatedObject, AnnotationSet};
use fast_core::model::{BBox, Mask, Query, Region};
use fast_core::pipeline::BatchQuery;

pub const THRESHOLD_W: u32 = 20;
pub const THRESHOLD_H: u32 = 20;

const ANCHOR_LABELS: &[&str] = &[
    "keyboard", "monitor", "lamp", "book", "cup", "phone", "plant", "chair",
];
const TARGET_LABELS: &[&str] = &["mouse", "pen", "coin", "ring", "key", "eraser"];
const ABSENT_LABELS: &[&str] = &["zebra", "umbrella", "guitar", "bicycle"];
const COLORS: &[&str] = &["red", "blue", "green", "white", "black", "yellow"];

/// Per-pixel counting oracle for mask overlap, independent of the RLE walk.
pub fn pixel_overlap_oracle(a: &Mask, b: &Mask) -> (u64, u64) {
    let pa = a.to_pixels();
    let pb = b.to_pixels();
    let mut inter = 0u64;
    let mut union = 0u64;
    for (x, y) in pa.iter().zip(&pb) {
        if *x && *y {
            inter += 1;
        }
        if *x || *y {
            union += 1;
        }
    }
    (inter, union)
}

pub fn random_mask(rng: &mut impl Rng, width: u32, height: u32) -> Mask {
    // mix densities so empty and full masks appear
    let density: f64 = rng.random_range(-0.2..1.2);
    let pixels: Vec<bool> = (0..width * height)
        .map(|_| rng.random_bool(density.clamp(0.0, 1.0)))
        .collect();
    Mask::from_pixels(width, height, &pixels).unwrap()
}

pub fn random_bbox(rng: &mut impl Rng, image_w: u32, image_h: u32) -> BBox {
    let x0 = rng.random_range(0..image_w);
    let x1 = rng.random_range(x0 + 1..=image_w);
    let y0 = rng.random_range(0..image_h);
    let y1 = rng.random_range(y0 + 1..=image_h);
    BBox::new(x0, y0, x1, y1, image_w, image_h).unwrap()
}

fn bbox_with_dims(
    rng: &mut impl Rng,
    w: u32,
    h: u32,
    image_w: u32,
    image_h: u32,
) -> BBox {
    let x0 = rng.random_range(0..=image_w - w);
    let y0 = rng.random_range(0..=image_h - h);
    BBox::new(x0, y0, x0 + w, y0 + h, image_w, image_h).unwrap()
}

/// What a generated scene expects the pipeline to do with its query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Visible,
    Invisible,
    Absent,
}

#[derive(Debug, Clone)]
pub struct GeneratedQuery {
    pub task: BatchQuery,
    pub kind: TargetKind,
    pub target_label: String,
}

/// One synthetic scene plus a query with its derived expectations.
pub struct GeneratedScene {
    pub image_ref: String,
    pub scene: SceneGraph,
    pub query: GeneratedQuery,
}

/// Builds a corpus of scenes cycling through visible, invisible, and absent
/// targets. Gold answers come from the construction itself, not the oracle.
pub fn generate_scene_corpus(n: usize, seed: u64) -> (SceneSet, Vec<GeneratedQuery>) {
    let mut scenes = SceneSet::default();
    let mut queries = Vec::new();
    for index in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
        let generated = generate_scene(index, &mut rng);
        scenes.insert(generated.image_ref.clone(), generated.scene);
        queries.push(generated.query);
    }
    (scenes, queries)
}

fn generate_scene(index: usize, rng: &mut impl Rng) -> GeneratedScene {
    let (image_w, image_h) = (640u32, 480u32);
    let image_ref = format!("scene-{index:04}");
    let kind = match index % 3 {
        0 => TargetKind::Visible,
        1 => TargetKind::Invisible,
        _ => TargetKind::Absent,
    };

    let anchor_label = ANCHOR_LABELS[rng.random_range(0..ANCHOR_LABELS.len())];
    let anchor_color = COLORS[rng.random_range(0..COLORS.len())];
    let anchor_w = rng.random_range(80..150);
    let anchor_h = rng.random_range(60..120);
    let anchor = SceneObject {
        label: anchor_label.to_string(),
        bbox: bbox_with_dims(rng, anchor_w, anchor_h, image_w, image_h),
        attributes: BTreeMap::from([("color".to_string(), anchor_color.to_string())]),
        clue: "in the room".to_string(),
    };

    let mut objects = vec![anchor];
    let target_label;
    let question;
    let gold;
    match kind {
        TargetKind::Absent => {
            let label = ABSENT_LABELS[rng.random_range(0..ABSENT_LABELS.len())];
            target_label = label.to_string();
            question = format!("Is there a {label} in the image?");
            gold = "no".to_string();
        }
        TargetKind::Visible | TargetKind::Invisible => {
            let label = TARGET_LABELS[rng.random_range(0..TARGET_LABELS.len())];
            let color = COLORS[rng.random_range(0..COLORS.len())];
            let (w, h) = if kind == TargetKind::Visible {
                // at least one dimension at or above the threshold
                (
                    rng.random_range(THRESHOLD_W..60),
                    rng.random_range(8..60),
                )
            } else {
                // strictly below the threshold in both dimensions
                (
                    rng.random_range(3..THRESHOLD_W),
                    rng.random_range(3..THRESHOLD_H),
                )
            };
            objects.push(SceneObject {
                label: label.to_string(),
                bbox: bbox_with_dims(rng, w, h, image_w, image_h),
                attributes: BTreeMap::from([("color".to_string(), color.to_string())]),
                clue: format!("near the {}", objects[0].label),
            });
            target_label = label.to_string();
            question = format!("What color is the {label}?");
            gold = color.to_string();
        }
    }

    let scene = SceneGraph::new(image_w, image_h, objects).unwrap();
    let query = Query::new(
        image_ref.clone(),
        question,
        format!("q-{index:04}"),
    )
    .unwrap();
    GeneratedScene {
        image_ref,
        scene,
        query: GeneratedQuery {
            task: BatchQuery::new(query).with_gold(vec![gold]),
            kind,
            target_label,
        },
    }
}

/// Recomputes the expected mode from scene geometry: slow iff the target is
/// absent or strictly below the threshold in both dimensions.
pub fn expected_slow(scene: &SceneGraph, target_label: &str) -> bool {
    match scene.find(target_label) {
        None => true,
        Some(obj) => obj.bbox.is_sub_threshold(THRESHOLD_W, THRESHOLD_H),
    }
}

/// Synthetic annotation corpus for the dataset builder: images mixing
/// clearly visible and sub-threshold objects.
pub fn generate_annotations(n_images: usize, seed: u64) -> (AnnotationSet, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n_images);
    for index in 0..n_images {
        let (image_w, image_h) = (640u32, 480u32);
        let mut objects = Vec::new();
        let n_objects = rng.random_range(1..=4usize);
        let mut labels: Vec<&str> = ANCHOR_LABELS
            .iter()
            .chain(TARGET_LABELS)
            .copied()
            .collect();
        for k in 0..n_objects {
            let pick = rng.random_range(0..labels.len());
            let label = labels.swap_remove(pick);
            let tiny = k > 0 && rng.random_bool(0.4);
            let (w, h) = if tiny {
                (rng.random_range(3..20), rng.random_range(3..20))
            } else {
                (rng.random_range(20..200), rng.random_range(20..180))
            };
            objects.push(AnnotatedObject {
                label: label.to_string(),
                bbox: bbox_with_dims(&mut rng, w, h, image_w, image_h),
                attributes: BTreeMap::new(),
            });
        }
        images.push(
            AnnotatedImage::new(format!("ann-{index:05}"), image_w, image_h, objects).unwrap(),
        );
    }
    let vocab: Vec<String> = ANCHOR_LABELS
        .iter()
        .chain(TARGET_LABELS)
        .chain(ABSENT_LABELS)
        .map(|s| s.to_string())
        .collect();
    (AnnotationSet { images }, vocab)
}

/// Backend wrapper that records every request, for call-count assertions.
pub struct CountingBackend<B> {
    inner: B,
    calls: Mutex<Vec<AdapterRequest>>,
}

impl<B: AdapterBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn roles(&self) -> Vec<AdapterRole> {
        self.calls.lock().unwrap().iter().map(|r| r.role).collect()
    }

    pub fn reset(&self) {
        self.calls.lock().unwrap().clear();
    }
}

impl<B: AdapterBackend> AdapterBackend for CountingBackend<B> {
    fn call(&self, req: &AdapterRequest) -> Result<AdapterResponse, AdapterError> {
        self.calls.lock().unwrap().push(req.clone());
        self.inner.call(req)
    }
}

/// Checks chain monotonicity: every box inside the region, every mask pixel
/// inside some box.
pub fn assert_chain_monotone(chain: &fast_core::model::EvidenceChain) {
    if let Some(region) = &chain.region {
        for bbox in &chain.boxes {
            assert!(
                region.contains(&bbox.to_region(), 1e-9),
                "box {bbox:?} escapes region {region:?}"
            );
        }
    } else {
        assert!(chain.boxes.is_empty(), "boxes without a region");
    }
    if let Some(mask) = &chain.mask {
        if chain.boxes.is_empty() {
            // single-stage mode: the mask is justified by the region instead
            assert!(chain.region.is_some());
            return;
        }
        let width = mask.width();
        for (start, len) in mask.set_runs() {
            for offset in 0..u64::from(len) {
                let idx = start + offset;
                let x = (idx % u64::from(width)) as u32;
                let y = (idx / u64::from(width)) as u32;
                assert!(
                    chain.boxes.iter().any(|b| b.contains_pixel(x, y)),
                    "mask pixel ({x},{y}) outside every box"
                );
            }
        }
    }
}

/// Region sanity for generated scenes: the proposed region is inside the
/// frame and the target box, when present, is inside the region.
pub fn region_is_sane(region: &Region) -> bool {
    region.left() >= 0.0 && region.right() <= 1.0 && region.top() >= 0.0 && region.bottom() <= 1.0
}
