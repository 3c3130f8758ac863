//! Model-agnostic engine for dual-mode visual agents.
//!
//! Routes each query between a direct fast path and a slow, hierarchical
//! chain-of-evidence path (clues, region, boxes, mask), speaking a small JSON
//! wire protocol to pluggable adapter services. Ships the switching-friendly
//! negative dataset builder, the evaluation metrics, and the runtime mixture
//! analysis that go with it.

pub mod adapter;
pub mod analysis;
pub mod dataset;
pub mod metrics;
pub mod model;
pub mod pipeline;

pub use adapter::{AdapterBackend, AdapterRequest, AdapterResponse, AdapterRole};
pub use model::{BBox, ContextClue, EvidenceChain, FinalAnswer, Mask, MissingObject, Mode, Query, Region};
pub use pipeline::{PipelineConfig, SummarizeWith};
