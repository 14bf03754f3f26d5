//! Frequency tagging for convolutional networks.
//!
//! Image regions are contrast-modulated with sinusoids at distinct
//! frequencies, the resulting frame sequence is pushed through a CNN, and each
//! filter's per-frame response is analysed in the frequency domain. Filters
//! whose spectra stand out at the harmonic and intermodulation frequencies of
//! the tags are reported as important, and the report can be turned into a
//! pruning mask.
//!
//! Module map:
//!
//! - [`stimgen`]: tagging configuration and frame sequence generation.
//! - [`cifar`]: CIFAR-10 binary batch reader/writer.
//! - [`tinynet`]: forward-only inference engine with activation taps.
//! - [`spectra`]: amplitude spectra, component enumeration, SNR/SNS.
//! - [`importance`]: per-image SNR tables and the threshold-and-vote rule.
//! - [`prunekit`]: filter masks and masked-model evaluation.
//! - [`pipeline`]: run orchestration, config files, caching and exports.
//! - [`fixtures`]: deterministic fixture models and images.

pub mod cifar;
pub mod error;
pub mod fixtures;
pub mod importance;
pub mod pipeline;
pub mod prunekit;
pub mod spectra;
pub mod stimgen;
pub mod tinynet;

pub use error::{Error, Result};
