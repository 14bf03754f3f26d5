//! JSON model graph document.
//!
//! ```json
//! {
//!   "format": "freqtag-graph/1",
//!   "input": { "channels": 3, "height": 32, "width": 32 },
//!   "normalization": { "mean": [0.0, 0.0, 0.0], "std": [1.0, 1.0, 1.0] },
//!   "nodes": [
//!     { "id": "conv1", "op": "conv2d", "inputs": ["input"], "in_ch": 3, "out_ch": 16,
//!       "kernel": 3, "stride": 1, "pad": 1, "weight": "conv1.weight", "bias": null },
//!     { "id": "relu1", "op": "relu", "inputs": ["conv1"] }
//!   ],
//!   "output": "relu1",
//!   "taps": [ { "node": "relu1", "layer": 1, "conv": "conv1" } ]
//! }
//! ```
//!
//! `"input"` is the reserved id of the network input. Node order in the
//! document is free; edges are given by `inputs`. A tap's optional `conv`
//! names the convolution whose filters the tapped channels correspond to;
//! masking uses it to locate the weights to zero.

use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "freqtag-graph/1";
pub const INPUT_ID: &str = "input";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub format: String,
    pub input: InputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    pub nodes: Vec<NodeDoc>,
    pub output: String,
    #[serde(default)]
    pub taps: Vec<TapDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

/// Per-channel input normalization, `x' = (x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    pub inputs: Vec<String>,
    #[serde(flatten)]
    pub op: OpDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpDoc {
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        weight: String,
        #[serde(default)]
        bias: Option<String>,
    },
    Batchnorm {
        ch: usize,
        eps: f32,
        gamma: String,
        beta: String,
        mean: String,
        var: String,
    },
    Relu,
    Add,
    GlobalAvgPool,
    Fc {
        in_dim: usize,
        out_dim: usize,
        weight: String,
        #[serde(default)]
        bias: Option<String>,
    },
}

impl OpDoc {
    pub fn name(&self) -> &'static str {
        match self {
            OpDoc::Conv2d { .. } => "conv2d",
            OpDoc::Batchnorm { .. } => "batchnorm",
            OpDoc::Relu => "relu",
            OpDoc::Add => "add",
            OpDoc::GlobalAvgPool => "global_avg_pool",
            OpDoc::Fc { .. } => "fc",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            OpDoc::Add => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapDoc {
    pub node: String,
    pub layer: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<String>,
}

impl GraphDoc {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph documents always serialize");
        s.push('\n');
        s
    }
}
