use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::Model;
use crate::error::{Error, Result};
use crate::stimgen::FrameSequence;

/// A convolutional filter, addressed by tap layer and output channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FilterId {
    pub layer: u32,
    pub channel: u32,
}

impl FilterId {
    pub fn new(layer: u32, channel: u32) -> Self {
        FilterId { layer, channel }
    }
}

impl fmt::Display for FilterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}C{}", self.layer, self.channel)
    }
}

/// How a feature map is collapsed to one scalar per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMode {
    /// Mean over entries that are exactly nonzero; 0 for an all-zero map.
    #[default]
    MeanExcludingZeros,
    Mean,
    Max,
}

impl ReductionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReductionMode::MeanExcludingZeros => "mean_excluding_zeros",
            ReductionMode::Mean => "mean",
            ReductionMode::Max => "max",
        }
    }
}

impl fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReductionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_excluding_zeros" => Ok(ReductionMode::MeanExcludingZeros),
            "mean" => Ok(ReductionMode::Mean),
            "max" => Ok(ReductionMode::Max),
            other => Err(Error::arg(format!("unknown reduction mode `{other}`"))),
        }
    }
}

/// Reduces one feature map channel. Accumulation is in f64.
pub fn reduce_feature_map(fmap: &[f32], mode: ReductionMode) -> f64 {
    debug_assert!(!fmap.is_empty());
    match mode {
        ReductionMode::MeanExcludingZeros => {
            let (sum, count) = fmap
                .iter()
                .filter(|&&v| v != 0.0)
                .fold((0.0f64, 0usize), |(s, n), &v| (s + v as f64, n + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        }
        ReductionMode::Mean => fmap.iter().map(|&v| v as f64).sum::<f64>() / fmap.len() as f64,
        ReductionMode::Max => fmap.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64)),
    }
}

/// One filter's response over a frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub filter: FilterId,
    pub values: Vec<f64>,
    pub mode: ReductionMode,
}

/// Runs every frame of `seq` through `model` and returns one trace per
/// (tap, channel), ordered by layer then channel.
///
/// Frames are evaluated in parallel on the current rayon pool; value `i` of
/// every trace always comes from frame `i`.
pub fn collect_traces(model: &Model, seq: &FrameSequence, mode: ReductionMode) -> Result<Vec<ActivationTrace>> {
    let per_frame: Vec<Vec<f64>> = (0..seq.len())
        .into_par_iter()
        .map(|i| {
            let out = model.forward_with_taps(&seq.frame(i))?;
            Ok(out
                .taps
                .iter()
                .flat_map(|fm| (0..fm.channels).map(move |c| reduce_feature_map(fm.channel(c), mode)))
                .collect())
        })
        .collect::<Result<_>>()?;

    let filters: Vec<FilterId> = model
        .taps()
        .iter()
        .flat_map(|t| (0..t.channels as u32).map(move |c| FilterId::new(t.layer, c)))
        .collect();
    Ok(filters
        .iter()
        .enumerate()
        .map(|(k, &filter)| ActivationTrace {
            filter,
            values: per_frame.iter().map(|row| row[k]).collect(),
            mode,
        })
        .collect())
}
