//! End-to-end runs: tag, infer, analyze, report and prune, writing
//! reproducible files plus a manifest that lists every one of them.

mod analyze;
pub mod cache;
pub mod config;
pub mod fmt;
mod inspect;
pub mod manifest;
mod prune;
mod select;

use std::fs;
use std::path::{Path, PathBuf};

pub use analyze::{run_analyze, run_report, AnalyzeOptions};
pub use config::{AnalysisSection, ImportanceSection, RunConfig, SpectraLayout};
pub use inspect::{inspect_model, ModelInspection, NodeInfo, TapInfo};
pub use manifest::{model_fingerprint, Artifact, RunManifest};
pub use prune::{run_prune, LayerPruneSummary, PruneOptions, PruneSummary};
pub use select::{ImageSelection, DEFAULT_IMAGE_COUNT};

use crate::error::{Error, Result};
use crate::tinynet::{load_model, Model, TensorStore};

pub const TOOL_NAME: &str = "freqtag";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A model loaded from its graph document and tensor store.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: Model,
    pub fingerprint: String,
}

impl LoadedModel {
    pub fn open(graph: &Path, weights: &Path) -> Result<Self> {
        let graph_bytes = read_file(graph)?;
        let weight_bytes = read_file(weights)?;
        let text = std::str::from_utf8(&graph_bytes)
            .map_err(|_| Error::format(format!("{} is not UTF-8", graph.display())))?;
        let store = TensorStore::from_bytes(&weight_bytes)?;
        Ok(LoadedModel {
            model: load_model(text, &store)?,
            fingerprint: model_fingerprint(&graph_bytes, &weight_bytes),
        })
    }
}

/// Sequential writer that records each file as a manifest artifact.
struct OutputWriter {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputWriter {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputWriter {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, role: &str, image_id: Option<usize>, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.artifacts.push(Artifact {
            path: rel.to_owned(),
            role: role.to_owned(),
            image_id,
            sha256: manifest::sha256_hex(bytes),
        });
        Ok(())
    }

    fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.artifacts = self.artifacts;
        fs::write(self.root.join(RunManifest::FILE_NAME), manifest.to_json())?;
        Ok(manifest)
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    if threads == Some(0) {
        return Err(Error::arg("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::arg(format!("cannot start worker pool: {e}")))
}

/// `fs::read` whose error names the file.
pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).map_err(|_| Error::format(format!("{} is not UTF-8", path.display())))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
