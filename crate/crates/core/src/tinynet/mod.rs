//! Forward-only CNN inference with per-filter activation taps.

pub mod graph;
pub mod model;
pub mod ops;
pub mod store;
mod traces;

pub use graph::GraphDoc;
pub use model::{FeatureMap, ForwardOutput, Model, Shape, Tap};
pub use store::{NamedTensor, TensorStore};
pub use traces::{collect_traces, reduce_feature_map, ActivationTrace, FilterId, ReductionMode};

use crate::Result;

/// Parses a graph document and validates it against `store`.
pub fn load_model(graph_json: &str, store: &TensorStore) -> Result<Model> {
    Model::load(&GraphDoc::from_json(graph_json)?, store)
}
