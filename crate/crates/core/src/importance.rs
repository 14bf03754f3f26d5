//! Threshold-and-vote filter importance.
//!
//! Each image yields an [`SnrTable`] (filter x component scores). A filter is
//! responsive on an image when its responsiveness statistic reaches the SNR
//! threshold, and important when it is responsive on at least
//! `ceil(vote_fraction * images)` images.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{
    score_bin, BinScore, ComponentKind, ComponentSet, Spectrum, ALIGNMENT_TOL, DEFAULT_BASELINE_OFFSETS,
};
use crate::tinynet::FilterId;

/// Which SNR a filter's per-image responsiveness is judged on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponsivenessStatistic {
    /// Max SNR over every harmonic and intermodulation component.
    #[default]
    MaxOverComponents,
    /// Max SNR over the two fundamentals only.
    MaxOverFundamentals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceConfig {
    pub snr_threshold: f64,
    pub vote_fraction: f64,
    pub f1: f64,
    pub f2: f64,
    pub max_order: u32,
    pub statistic: ResponsivenessStatistic,
    pub baseline_offsets: Vec<i32>,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig {
            snr_threshold: 150.0,
            vote_fraction: 0.5,
            f1: 6.0,
            f2: 7.5,
            max_order: 4,
            statistic: ResponsivenessStatistic::MaxOverComponents,
            baseline_offsets: DEFAULT_BASELINE_OFFSETS.to_vec(),
        }
    }
}

impl ImportanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.snr_threshold.is_finite() && self.snr_threshold > 0.0) {
            return Err(Error::arg(format!(
                "snr_threshold must be positive, got {}",
                self.snr_threshold
            )));
        }
        if !(self.vote_fraction > 0.0 && self.vote_fraction <= 1.0) {
            return Err(Error::arg(format!(
                "vote_fraction must lie in (0, 1], got {}",
                self.vote_fraction
            )));
        }
        if self.max_order == 0 {
            return Err(Error::arg("max_order must be at least 1"));
        }
        if self.baseline_offsets.len() < 2 || self.baseline_offsets.contains(&0) {
            return Err(Error::arg("need at least two nonzero baseline offsets"));
        }
        Ok(())
    }

    /// Votes needed out of `images` to be important.
    pub fn required_votes(&self, images: usize) -> usize {
        // The small slack keeps e.g. 0.07 * 100 = 7.000000000000001 at 7.
        let raw = self.vote_fraction * images as f64;
        ((raw - 1e-9).ceil().max(0.0) as usize).min(images)
    }
}

/// Scores of every filter at every component for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrTable {
    pub components: ComponentSet,
    /// Ascending by (layer, channel).
    pub filters: Vec<FilterId>,
    /// `scores[f][c]` for filter `f` and component `c`.
    pub scores: Vec<Vec<BinScore>>,
}

impl SnrTable {
    pub fn score(&self, filter: usize, component: usize) -> BinScore {
        self.scores[filter][component]
    }

    /// Responsiveness statistic of filter row `f`; `None` when no relevant
    /// entry has a valid baseline.
    pub fn statistic(&self, f: usize, stat: ResponsivenessStatistic) -> Option<f64> {
        self.components
            .components
            .iter()
            .zip(&self.scores[f])
            .filter(|(c, _)| match stat {
                ResponsivenessStatistic::MaxOverComponents => true,
                ResponsivenessStatistic::MaxOverFundamentals => c.is_fundamental(),
            })
            .filter_map(|(_, s)| s.snr())
            .reduce(f64::max)
    }
}

/// Builds one image's table from per-filter spectra using the default
/// exclusion set (all component bins and DC).
pub fn component_snr_table(
    spectra: &[(FilterId, Spectrum)],
    components: &ComponentSet,
    baseline_offsets: &[i32],
) -> Result<SnrTable> {
    let exclusion = components.default_exclusion();
    let mut rows: Vec<(FilterId, Vec<BinScore>)> = Vec::with_capacity(spectra.len());
    for (filter, spec) in spectra {
        if (spec.delta_f() - components.delta_f).abs() > ALIGNMENT_TOL * components.delta_f {
            return Err(Error::arg(format!(
                "filter {filter}: spectrum resolution {} Hz differs from component grid {} Hz",
                spec.delta_f(),
                components.delta_f
            )));
        }
        if let Some(c) = components.components.iter().find(|c| c.bin >= spec.len()) {
            return Err(Error::arg(format!(
                "component {} Hz lies outside filter {filter}'s spectrum",
                c.frequency
            )));
        }
        let scores = components
            .components
            .iter()
            .map(|c| score_bin(spec, c.bin, baseline_offsets, &exclusion))
            .collect::<Result<Vec<_>>>()?;
        rows.push((*filter, scores));
    }
    rows.sort_by_key(|(f, _)| *f);
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::arg("duplicate filter in SNR table"));
    }
    let (filters, scores) = rows.into_iter().unzip();
    Ok(SnrTable {
        components: components.clone(),
        filters,
        scores,
    })
}

/// One image's table tagged with the image id.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTable {
    pub image_id: usize,
    pub table: SnrTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub frequency: f64,
    pub kind: ComponentKind,
    pub order: u32,
    /// Mean over images with a valid baseline; `None` if there are none.
    pub mean_snr: Option<f64>,
    pub mean_sns: Option<f64>,
    pub valid_images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub layer: u32,
    pub channel: u32,
    pub votes: usize,
    pub responsive_fraction: f64,
    pub important: bool,
    pub components: Vec<ComponentSummary>,
}

impl FilterReport {
    pub fn id(&self) -> FilterId {
        FilterId::new(self.layer, self.channel)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer: u32,
    pub n_filters: usize,
    pub n_important: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: ImportanceConfig,
    /// Recorded separately so a reader sees which interpretation of the
    /// threshold was applied.
    pub statistic: ResponsivenessStatistic,
    pub image_ids: Vec<usize>,
    pub required_votes: usize,
    pub model_fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub provenance: Provenance,
    pub filters: Vec<FilterReport>,
    pub layers: Vec<LayerSummary>,
}

impl ImportanceReport {
    pub fn important_filters(&self) -> Vec<FilterId> {
        self.filters.iter().filter(|f| f.important).map(FilterReport::id).collect()
    }

    pub fn image_count(&self) -> usize {
        self.provenance.image_ids.len()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Applies the threshold-and-vote rule across images.
pub fn assess(tables: &[ImageTable], cfg: &ImportanceConfig) -> Result<ImportanceReport> {
    cfg.validate()?;
    let first = tables
        .first()
        .ok_or_else(|| Error::arg("at least one image is required"))?;
    for t in &tables[1..] {
        if t.table.filters != first.table.filters {
            return Err(Error::arg(format!(
                "image {} covers a different filter set than image {}",
                t.image_id, first.image_id
            )));
        }
        if t.table.components != first.table.components {
            return Err(Error::arg(format!(
                "image {} uses a different component set than image {}",
                t.image_id, first.image_id
            )));
        }
    }

    let n_images = tables.len();
    let required = cfg.required_votes(n_images);
    let components = &first.table.components.components;
    let mut filters = Vec::with_capacity(first.table.filters.len());
    for (f, id) in first.table.filters.iter().enumerate() {
        let votes = tables
            .iter()
            .filter(|t| {
                t.table
                    .statistic(f, cfg.statistic)
                    .is_some_and(|s| s >= cfg.snr_threshold)
            })
            .count();
        let summaries = components
            .iter()
            .enumerate()
            .map(|(c, comp)| {
                let valid: Vec<(f64, f64)> = tables
                    .iter()
                    .filter_map(|t| match t.table.score(f, c) {
                        BinScore::Valid { snr, sns } => Some((snr, sns)),
                        BinScore::InvalidBaseline { .. } => None,
                    })
                    .collect();
                let n = valid.len();
                let mean = |pick: fn(&(f64, f64)) -> f64| {
                    (n > 0).then(|| valid.iter().map(pick).sum::<f64>() / n as f64)
                };
                ComponentSummary {
                    frequency: comp.frequency,
                    kind: comp.kind,
                    order: comp.order,
                    mean_snr: mean(|v| v.0),
                    mean_sns: mean(|v| v.1),
                    valid_images: n,
                }
            })
            .collect();
        filters.push(FilterReport {
            layer: id.layer,
            channel: id.channel,
            votes,
            responsive_fraction: votes as f64 / n_images as f64,
            important: votes >= required,
            components: summaries,
        });
    }

    let mut per_layer: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for f in &filters {
        let entry = per_layer.entry(f.layer).or_default();
        entry.0 += 1;
        entry.1 += f.important as usize;
    }
    let layers = per_layer
        .into_iter()
        .map(|(layer, (n_filters, n_important))| LayerSummary {
            layer,
            n_filters,
            n_important,
        })
        .collect();

    Ok(ImportanceReport {
        provenance: Provenance {
            config: cfg.clone(),
            statistic: cfg.statistic,
            image_ids: tables.iter().map(|t| t.image_id).collect(),
            required_votes: required,
            model_fingerprint: None,
        },
        filters,
        layers,
    })
}

/// `(layer, important count)` in ascending layer order, zero counts included.
pub fn layer_histogram(report: &ImportanceReport) -> Vec<(u32, usize)> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for f in &report.filters {
        *counts.entry(f.layer).or_default() += f.important as usize;
    }
    counts.into_iter().collect()
}
