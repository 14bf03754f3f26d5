use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::Result;

/// One file written by a run, relative to the run's output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<usize>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFiles {
    pub graph: String,
    pub weights: String,
    pub data: String,
    pub data_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSelectionRecord {
    pub requested: String,
    pub seed: u64,
    pub image_ids: Vec<usize>,
}

/// Everything needed to reproduce a run, plus every file it wrote.
///
/// Worker count and wall-clock data are deliberately absent so identical
/// inputs give a byte-identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// Absent for `prune`, whose settings come from the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    pub model_fingerprint: String,
    pub inputs: InputFiles,
    pub selection: ImageSelectionRecord,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifests always serialize");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&super::read_text(path)?)?)
    }

    pub fn artifact(&self, role: &str) -> impl Iterator<Item = &Artifact> {
        let role = role.to_owned();
        self.artifacts.iter().filter(move |a| a.role == role)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash over the graph document and the tensor store.
pub fn model_fingerprint(graph: &[u8], weights: &[u8]) -> String {
    let mut h = Sha256::new();
    for (tag, part) in [(&b"graph"[..], graph), (&b"weights"[..], weights)] {
        h.update(tag);
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    format!("sha256:{}", hex::encode(h.finalize()))
}
