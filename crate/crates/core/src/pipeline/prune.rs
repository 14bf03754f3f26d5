use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::manifest::{sha256_hex, ImageSelectionRecord, InputFiles, RunManifest};
use super::select::ImageSelection;
use super::{display, thread_pool, LoadedModel, OutputWriter, TOOL_NAME, TOOL_VERSION};
use crate::cifar;
use crate::error::{Error, Result};
use crate::importance::ImportanceReport;
use crate::prunekit::{apply_mask, evaluate, Evaluation, FilterMask, GuardEvent};

#[derive(Debug, Clone)]
pub struct PruneOptions {
    pub report: PathBuf,
    pub graph: PathBuf,
    pub weights: PathBuf,
    pub data: PathBuf,
    /// `None` evaluates every record.
    pub images: Option<ImageSelection>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPruneSummary {
    pub layer: u32,
    pub n_filters: usize,
    pub n_zeroed: usize,
}

/// Original versus masked accuracy. Exploratory output only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    pub model_fingerprint: String,
    pub n_filters: usize,
    pub n_zeroed: usize,
    pub layers: Vec<LayerPruneSummary>,
    /// Layers where every filter was unimportant and one was kept anyway.
    pub guard: Vec<GuardEvent>,
    pub original: Evaluation,
    pub masked: Evaluation,
    pub accuracy_delta: f64,
}

/// Masks the model by `report` and evaluates both versions on the dataset.
///
/// Refuses to run when the report was produced for a different model.
pub fn run_prune(opts: &PruneOptions) -> Result<RunManifest> {
    let report_text = super::read_text(&opts.report)?;
    let report = ImportanceReport::from_json(&report_text)?;
    let loaded = LoadedModel::open(&opts.graph, &opts.weights)?;
    let expected = report.provenance.model_fingerprint.clone().unwrap_or_else(|| "<none>".into());
    if expected != loaded.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected,
            found: loaded.fingerprint,
        });
    }

    let mask = FilterMask::from_report(&report);
    let masked = apply_mask(&loaded.model, &mask)?;

    let data = super::read_file(&opts.data)?;
    let selection = opts.images.clone().unwrap_or(ImageSelection::All);
    let ids = selection.resolve(cifar::record_count(&data)?, opts.seed)?;
    let dataset = cifar::decode_records(&data, &ids)?;
    let pool = thread_pool(opts.threads)?;
    let (original, masked_eval) = pool.install(|| -> Result<_> {
        Ok((evaluate(&loaded.model, &dataset)?, evaluate(&masked, &dataset)?))
    })?;

    let layers = report
        .layers
        .iter()
        .map(|l| LayerPruneSummary {
            layer: l.layer,
            n_filters: l.n_filters,
            n_zeroed: mask.zeroed.iter().filter(|f| f.layer == l.layer).count(),
        })
        .collect();
    let summary = PruneSummary {
        model_fingerprint: loaded.fingerprint.clone(),
        n_filters: mask.inventory.len(),
        n_zeroed: mask.zeroed.len(),
        layers,
        guard: mask.guard.clone(),
        accuracy_delta: masked_eval.accuracy - original.accuracy,
        original,
        masked: masked_eval,
    };

    let mut writer = OutputWriter::new(&opts.out)?;
    writer.write("mask.json", "mask", None, mask.to_json().as_bytes())?;
    let mut summary_json = serde_json::to_string_pretty(&summary)?;
    summary_json.push('\n');
    writer.write("prune_summary.json", "prune_summary", None, summary_json.as_bytes())?;
    writer.finish(RunManifest {
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        command: "prune".into(),
        config: None,
        model_fingerprint: loaded.fingerprint,
        inputs: InputFiles {
            graph: display(&opts.graph),
            weights: display(&opts.weights),
            data: display(&opts.data),
            data_sha256: sha256_hex(&data),
            report: Some(display(&opts.report)),
            report_sha256: Some(sha256_hex(report_text.as_bytes())),
        },
        selection: ImageSelectionRecord {
            requested: selection.to_string(),
            seed: opts.seed,
            image_ids: ids,
        },
        artifacts: Vec::new(),
    })
}
