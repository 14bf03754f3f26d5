//! Structural filter masks derived from importance reports.
//!
//! Masking zeroes filters in place instead of removing them, so tensor shapes
//! stay fixed and kept computation is bit-identical to the original model.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::ImportanceReport;
use crate::stimgen::SourceImage;
use crate::tinynet::model::Op;
use crate::tinynet::{FilterId, Model};

/// Where a mask came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MaskSource {
    pub model_fingerprint: Option<String>,
    pub snr_threshold: Option<f64>,
    pub vote_fraction: Option<f64>,
    pub image_count: Option<usize>,
}

/// A layer whose filters were all unimportant; `kept` survived the guard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardEvent {
    pub layer: u32,
    pub kept: FilterId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMask {
    /// Every assessable filter of the target model.
    pub inventory: BTreeSet<FilterId>,
    pub zeroed: BTreeSet<FilterId>,
    pub source: MaskSource,
    #[serde(default)]
    pub guard: Vec<GuardEvent>,
}

impl FilterMask {
    /// Keeps everything.
    pub fn keep_all(model: &Model) -> Self {
        FilterMask {
            inventory: inventory(model),
            zeroed: BTreeSet::new(),
            source: MaskSource::default(),
            guard: Vec::new(),
        }
    }

    /// Zeroes exactly `zeroed`. No per-layer guard is applied here.
    pub fn from_zeroed(model: &Model, zeroed: impl IntoIterator<Item = FilterId>) -> Result<Self> {
        let mask = FilterMask {
            zeroed: zeroed.into_iter().collect(),
            ..Self::keep_all(model)
        };
        if let Some(f) = mask.zeroed.iter().find(|f| !mask.inventory.contains(f)) {
            return Err(Error::arg(format!("filter {f} is not part of the model")));
        }
        Ok(mask)
    }

    /// Zeroes every unimportant filter, except that a layer never loses all
    /// of its filters: the one with the most votes (lowest channel on ties)
    /// is kept and the event recorded in [`FilterMask::guard`].
    pub fn from_report(report: &ImportanceReport) -> Self {
        let mut by_layer: BTreeMap<u32, Vec<&crate::importance::FilterReport>> = BTreeMap::new();
        for f in &report.filters {
            by_layer.entry(f.layer).or_default().push(f);
        }
        let mut zeroed = BTreeSet::new();
        let mut guard = Vec::new();
        for (layer, filters) in by_layer {
            if filters.iter().all(|f| !f.important) {
                let keep = filters
                    .iter()
                    .max_by(|a, b| a.votes.cmp(&b.votes).then(b.channel.cmp(&a.channel)))
                    .expect("layers are nonempty")
                    .id();
                guard.push(GuardEvent { layer, kept: keep });
                zeroed.extend(filters.iter().map(|f| f.id()).filter(|&id| id != keep));
            } else {
                zeroed.extend(filters.iter().filter(|f| !f.important).map(|f| f.id()));
            }
        }
        let prov = &report.provenance;
        FilterMask {
            inventory: report.filters.iter().map(|f| f.id()).collect(),
            zeroed,
            source: MaskSource {
                model_fingerprint: prov.model_fingerprint.clone(),
                snr_threshold: Some(prov.config.snr_threshold),
                vote_fraction: Some(prov.config.vote_fraction),
                image_count: Some(prov.image_ids.len()),
            },
            guard,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("masks always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// All `(layer, channel)` pairs exposed by the model's taps.
pub fn inventory(model: &Model) -> BTreeSet<FilterId> {
    model
        .taps()
        .iter()
        .flat_map(|t| (0..t.channels as u32).map(move |c| FilterId::new(t.layer, c)))
        .collect()
}

/// Returns a copy of `model` whose zeroed filters output exactly 0.
///
/// The filter's convolution weights and bias are zeroed, together with the
/// gamma/beta of a batchnorm that directly consumes that convolution. When the
/// tap is not reached from the convolution through batchnorm/relu alone (e.g. a
/// residual sum), the tapped channel is additionally forced to zero at the tap.
pub fn apply_mask(model: &Model, mask: &FilterMask) -> Result<Model> {
    let inv = inventory(model);
    if inv != mask.inventory {
        return Err(Error::arg(format!(
            "mask covers {} filters but the model exposes {}",
            mask.inventory.len(),
            inv.len()
        )));
    }
    let mut out = model.clone();
    let taps = model.taps().to_vec();
    for filter in &mask.zeroed {
        let tap = taps
            .iter()
            .find(|t| t.layer == filter.layer)
            .ok_or_else(|| Error::arg(format!("filter {filter} has no tap")))?;
        let channel = filter.channel as usize;

        let (conv, structural) = match tap.conv_index {
            Some(conv) => (Some(conv), chain_reaches(&out, tap.node_index, conv)),
            None => match chain_conv(&out, tap.node_index) {
                Some(conv) => (Some(conv), true),
                None => (None, false),
            },
        };
        if let Some(conv) = conv {
            zero_conv_channel(&mut out, conv, channel);
            for k in 0..out.nodes.len() {
                if out.nodes[k].inputs == [conv + 1] {
                    if let Op::Batchnorm { gamma, beta, .. } = &mut out.nodes[k].op {
                        gamma[channel] = 0.0;
                        beta[channel] = 0.0;
                    }
                }
            }
        }
        if !structural {
            let gate = out.gates[tap.node_index].get_or_insert_with(|| vec![false; tap.channels]);
            gate[channel] = true;
        }
    }
    Ok(out)
}

/// Follows single-input batchnorm/relu links upstream from `node` to a conv.
fn chain_conv(model: &Model, mut node: usize) -> Option<usize> {
    loop {
        match &model.nodes[node].op {
            Op::Conv2d { .. } => return Some(node),
            Op::Batchnorm { .. } | Op::Relu => {
                let slot = model.nodes[node].inputs[0];
                if slot == 0 {
                    return None;
                }
                node = slot - 1;
            }
            _ => return None,
        }
    }
}

fn chain_reaches(model: &Model, node: usize, conv: usize) -> bool {
    chain_conv(model, node) == Some(conv)
}

fn zero_conv_channel(model: &mut Model, conv: usize, channel: usize) {
    if let Op::Conv2d { geom, weight, bias } = &mut model.nodes[conv].op {
        let per_filter = geom.in_ch * geom.kernel * geom.kernel;
        weight[channel * per_filter..(channel + 1) * per_filter].fill(0.0);
        if let Some(b) = bias {
            b[channel] = 0.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: usize,
    pub total: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub per_class: Vec<ClassCount>,
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f32]) -> usize {
    let mut best = 0;
    for (k, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = k;
        }
    }
    best
}

/// Top-1 accuracy over `dataset`, evaluated in parallel.
pub fn evaluate(model: &Model, dataset: &[(SourceImage, u8)]) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::arg("cannot evaluate on an empty dataset"));
    }
    let predictions: Vec<usize> = dataset
        .par_iter()
        .map(|(img, _)| model.forward_with_taps(img).map(|o| argmax(&o.logits)))
        .collect::<Result<_>>()?;
    let classes = match model.output_shape() {
        crate::tinynet::Shape::Flat(d) => d,
        crate::tinynet::Shape::Spatial { c, h, w } => c * h * w,
    };
    let max_label = dataset.iter().map(|(_, l)| *l as usize).max().unwrap_or(0);
    let mut per_class: Vec<ClassCount> = (0..classes.max(max_label + 1))
        .map(|class| ClassCount {
            class,
            total: 0,
            correct: 0,
        })
        .collect();
    let mut correct = 0;
    for ((_, label), &pred) in dataset.iter().zip(&predictions) {
        let entry = &mut per_class[*label as usize];
        entry.total += 1;
        if pred == *label as usize {
            entry.correct += 1;
            correct += 1;
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / dataset.len() as f64,
        correct,
        total: dataset.len(),
        per_class,
    })
}
