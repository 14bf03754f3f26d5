//! TOML run configuration.
//!
//! ```toml
//! [tagging]
//! fps = 120.0
//! duration = 2.0
//! phase = 0.0
//! contrast_min = 0.5
//! contrast_max = 1.0
//! region_freqs = [{ region = "L", frequency = 6.0 }, { region = "R", frequency = 7.5 }]
//!
//! [importance]
//! snr_threshold = 150.0
//! vote_fraction = 0.5
//! max_order = 4
//! statistic = "max_over_components"
//! baseline_offsets = [-2, -1, 1, 2]
//!
//! [analysis]
//! reduction = "mean_excluding_zeros"
//! spectra_layout = "combined"
//! ```
//!
//! Every key is optional. The importance analysis uses the first listed
//! region frequency as `f1` and the second as `f2`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::{ImportanceConfig, ResponsivenessStatistic};
use crate::spectra::DEFAULT_BASELINE_OFFSETS;
use crate::stimgen::{RegionId, TaggingConfig};
use crate::tinynet::ReductionMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceSection {
    pub snr_threshold: f64,
    pub vote_fraction: f64,
    pub max_order: u32,
    pub statistic: ResponsivenessStatistic,
    pub baseline_offsets: Vec<i32>,
}

impl Default for ImportanceSection {
    fn default() -> Self {
        ImportanceSection {
            snr_threshold: 150.0,
            vote_fraction: 0.5,
            max_order: 4,
            statistic: ResponsivenessStatistic::default(),
            baseline_offsets: DEFAULT_BASELINE_OFFSETS.to_vec(),
        }
    }
}

/// How spectrum CSVs are laid out on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectraLayout {
    /// One long-format file per image with `image_id,layer,channel` prefix
    /// columns.
    #[default]
    Combined,
    /// One file per image and filter.
    PerFilter,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub reduction: ReductionMode,
    pub spectra_layout: SpectraLayout,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tagging: TaggingConfig,
    pub importance: ImportanceSection,
    pub analysis: AnalysisSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&super::read_text(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Validates everything an analysis run needs: the tagging invariants,
    /// exactly two regions named `L` and `R` (the half mask), and the
    /// importance parameters.
    pub fn validate(&self) -> Result<()> {
        self.tagging.validate()?;
        let regions: Vec<&RegionId> = self.tagging.region_freqs.iter().map(|r| &r.region).collect();
        let mut sorted = regions.clone();
        sorted.sort();
        if sorted != [&RegionId::new("L"), &RegionId::new("R")] {
            return Err(Error::Config(format!(
                "analysis tags the left/right halves and needs regions L and R, got {:?}",
                regions.iter().map(|r| r.0.as_str()).collect::<Vec<_>>()
            )));
        }
        self.importance_config().validate()
    }

    pub fn importance_config(&self) -> ImportanceConfig {
        let freq = |k: usize| self.tagging.region_freqs.get(k).map_or(f64::NAN, |r| r.frequency);
        ImportanceConfig {
            snr_threshold: self.importance.snr_threshold,
            vote_fraction: self.importance.vote_fraction,
            f1: freq(0),
            f2: freq(1),
            max_order: self.importance.max_order,
            statistic: self.importance.statistic,
            baseline_offsets: self.importance.baseline_offsets.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.importance_config(), ImportanceConfig::default());
    }

    #[test]
    fn partial_override() {
        let cfg = RunConfig::from_toml(
            "[importance]\nsnr_threshold = 20.0\n[analysis]\nreduction = \"max\"\n",
        )
        .unwrap();
        assert_eq!(cfg.importance.snr_threshold, 20.0);
        assert_eq!(cfg.importance.vote_fraction, 0.5);
        assert_eq!(cfg.analysis.reduction, ReductionMode::Max);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_regions() {
        assert!(matches!(RunConfig::from_toml("[tagging]\nfsp = 3\n"), Err(Error::Config(_))));
        let cfg = RunConfig::from_toml(
            "[tagging]\nregion_freqs = [{ region = \"top\", frequency = 6.0 }, { region = \"R\", frequency = 7.5 }]\n",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn misaligned_tag_is_an_alignment_error() {
        let cfg = RunConfig::from_toml(
            "[tagging]\nregion_freqs = [{ region = \"L\", frequency = 6.3 }, { region = \"R\", frequency = 7.5 }]\n",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Alignment { .. })));
    }
}
