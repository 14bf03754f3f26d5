use std::path::Path;

use serde::Serialize;

use super::LoadedModel;
use crate::error::Result;
use crate::tinynet::graph::InputSpec;
use crate::tinynet::Shape;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeInfo {
    pub id: String,
    pub op: String,
    pub shape: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TapInfo {
    pub layer: u32,
    pub node: String,
    pub conv: Option<String>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

/// What `inspect-model` prints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInspection {
    pub model_fingerprint: String,
    pub input: InputSpec,
    pub output: String,
    pub parameters: usize,
    pub assessable_filters: usize,
    pub nodes: Vec<NodeInfo>,
    pub taps: Vec<TapInfo>,
}

fn shape_str(s: Shape) -> String {
    match s {
        Shape::Spatial { c, h, w } => format!("{c}x{h}x{w}"),
        Shape::Flat(d) => d.to_string(),
    }
}

pub fn inspect_model(graph: &Path, weights: &Path) -> Result<ModelInspection> {
    let loaded = LoadedModel::open(graph, weights)?;
    let model = &loaded.model;
    let summary = model.summary();
    let taps: Vec<TapInfo> = model
        .taps()
        .iter()
        .map(|t| TapInfo {
            layer: t.layer,
            node: t.node.clone(),
            conv: t.conv_index.map(|k| summary[k].0.clone()),
            channels: t.channels,
            height: t.height,
            width: t.width,
        })
        .collect();
    Ok(ModelInspection {
        model_fingerprint: loaded.fingerprint.clone(),
        input: model.input_spec(),
        output: shape_str(model.output_shape()),
        parameters: model.parameter_count(),
        assessable_filters: taps.iter().map(|t| t.channels).sum(),
        nodes: summary
            .iter()
            .map(|(id, op, shape)| NodeInfo {
                id: id.clone(),
                op: (*op).to_owned(),
                shape: shape_str(*shape),
            })
            .collect(),
        taps,
    })
}
