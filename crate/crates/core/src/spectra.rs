//! One-sided amplitude spectra, tag component enumeration and per-bin SNR.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to the baseline before dividing.
pub const SNR_EPSILON: f64 = 1e-12;

/// Tolerance on `f / delta_f` being an integer.
pub const ALIGNMENT_TOL: f64 = 1e-9;

/// Neighbor offsets averaged into the baseline.
pub const DEFAULT_BASELINE_OFFSETS: [i32; 4] = [-2, -1, 1, 2];

/// One-sided amplitude spectrum with `N/2 + 1` bins.
///
/// Bin 0 is `|X_0|/N`, bins `1..N/2` are `2|X_k|/N` and the Nyquist bin is
/// `|X_{N/2}|/N`, so a bin-aligned sinusoid of amplitude `A` reads `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    amplitudes: Vec<f64>,
    delta_f: f64,
    sample_rate: f64,
}

impl Spectrum {
    /// Wraps precomputed amplitudes. `amplitudes.len()` must be `N/2 + 1` for
    /// an even `N` with `sample_rate / N == delta_f`.
    pub fn from_amplitudes(amplitudes: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if amplitudes.len() < 3 {
            return Err(Error::arg("a spectrum needs at least 3 bins"));
        }
        if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::arg("amplitudes must be finite and nonnegative"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::arg("sample rate must be positive"));
        }
        let n = 2 * (amplitudes.len() - 1);
        Ok(Spectrum {
            amplitudes,
            delta_f: sample_rate / n as f64,
            sample_rate,
        })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, bin: usize) -> f64 {
        self.amplitudes[bin]
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }

    /// Length of the time-domain trace.
    pub fn trace_len(&self) -> usize {
        2 * (self.amplitudes.len() - 1)
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.delta_f
    }

    /// Time-domain energy `sum x^2` implied by the amplitudes (Parseval).
    pub fn energy(&self) -> f64 {
        let n = self.trace_len() as f64;
        let last = self.amplitudes.len() - 1;
        let interior: f64 = self.amplitudes[1..last].iter().map(|a| a * a).sum();
        n * self.amplitudes[0].powi(2) + n / 2.0 * interior + n * self.amplitudes[last].powi(2)
    }

    /// `c * self` for `c >= 0`.
    pub fn scaled(&self, c: f64) -> Spectrum {
        Spectrum {
            amplitudes: self.amplitudes.iter().map(|a| a * c).collect(),
            ..self.clone()
        }
    }
}

/// Amplitude spectra for traces of one fixed length, reusing the FFT plan.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    len: usize,
    sample_rate: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("len", &self.len)
            .field("sample_rate", &self.sample_rate)
            .finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(len: usize, sample_rate: f64) -> Result<Self> {
        if len < 4 || !len.is_multiple_of(2) {
            return Err(Error::arg(format!(
                "trace length must be even and at least 4, got {len}"
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::arg("sample rate must be positive"));
        }
        let fft = FftPlanner::new().plan_fft_forward(len);
        Ok(SpectrumAnalyzer {
            len,
            sample_rate,
            fft,
        })
    }

    pub fn analyze(&self, trace: &[f64]) -> Result<Spectrum> {
        if trace.len() != self.len {
            return Err(Error::arg(format!(
                "trace has {} samples, analyzer expects {}",
                trace.len(),
                self.len
            )));
        }
        if trace.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("trace contains non-finite values"));
        }
        let mut buf: Vec<Complex<f64>> = trace.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        let n = self.len as f64;
        let half = self.len / 2;
        let amplitudes = (0..=half)
            .map(|k| {
                let scale = if k == 0 || k == half { 1.0 } else { 2.0 };
                scale * buf[k].norm() / n
            })
            .collect();
        Ok(Spectrum {
            amplitudes,
            delta_f: self.sample_rate / n,
            sample_rate: self.sample_rate,
        })
    }
}

/// One-shot convenience wrapper over [`SpectrumAnalyzer`].
pub fn amplitude_spectrum(trace: &[f64], sample_rate: f64) -> Result<Spectrum> {
    SpectrumAnalyzer::new(trace.len(), sample_rate)?.analyze(trace)
}

/// Bin index of a bin-aligned frequency; never rounds a misaligned one.
pub fn bin_of_frequency(f: f64, delta_f: f64) -> Result<usize> {
    if !(delta_f.is_finite() && delta_f > 0.0) {
        return Err(Error::arg(format!("delta_f must be positive, got {delta_f}")));
    }
    if !(f.is_finite() && f >= 0.0) {
        return Err(Error::arg(format!("frequency must be nonnegative, got {f}")));
    }
    let ratio = f / delta_f;
    if (ratio - ratio.round()).abs() > ALIGNMENT_TOL {
        return Err(Error::Alignment {
            frequency: f,
            delta_f,
        });
    }
    Ok(ratio.round() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    HarmonicF1,
    HarmonicF2,
    Intermodulation,
}

impl ComponentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComponentKind::HarmonicF1 => "harmonic_f1",
            ComponentKind::HarmonicF2 => "harmonic_f2",
            ComponentKind::Intermodulation => "intermodulation",
        }
    }

    pub fn is_harmonic(&self) -> bool {
        !matches!(self, ComponentKind::Intermodulation)
    }
}

/// A target frequency `|n f1 + m f2|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub frequency: f64,
    pub bin: usize,
    pub kind: ComponentKind,
    pub order: u32,
    /// Signed multipliers `(n, m)` of `f1` and `f2`.
    pub coefficients: (i32, i32),
}

impl Component {
    pub fn is_fundamental(&self) -> bool {
        self.kind.is_harmonic() && self.order == 1
    }
}

/// Deduplicated harmonic and intermodulation targets, sorted by frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSet {
    pub f1: f64,
    pub f2: f64,
    pub max_order: u32,
    pub delta_f: f64,
    pub components: Vec<Component>,
}

impl ComponentSet {
    pub fn bins(&self) -> BTreeSet<usize> {
        self.components.iter().map(|c| c.bin).collect()
    }

    /// Bins never used as baseline: every component bin plus DC.
    pub fn default_exclusion(&self) -> BTreeSet<usize> {
        let mut set = self.bins();
        set.insert(0);
        set
    }

    pub fn by_bin(&self, bin: usize) -> Option<&Component> {
        self.components.iter().find(|c| c.bin == bin)
    }

    pub fn frequencies(&self, kind: ComponentKind) -> Vec<f64> {
        self.components
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.frequency)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Enumerates harmonics `n f1`, `m f2` (order `n`, `m`) and intermodulation
/// products `|n f1 ± m f2|` with `n, m >= 1` (order `n + m`) up to
/// `max_order`.
///
/// Zero and at-or-above-Nyquist frequencies are dropped. A frequency reached
/// several ways keeps the lowest order; on equal order harmonics win over
/// intermodulation.
pub fn enumerate_components(f1: f64, f2: f64, max_order: u32, delta_f: f64, nyquist: f64) -> Result<ComponentSet> {
    if max_order == 0 {
        return Err(Error::arg("max_order must be at least 1"));
    }
    if f1 == f2 {
        return Err(Error::arg("f1 and f2 must differ"));
    }
    for f in [f1, f2] {
        if !(f > 0.0 && f < nyquist) {
            return Err(Error::arg(format!(
                "tag frequency {f} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
    }
    let b1 = bin_of_frequency(f1, delta_f)? as i64;
    let b2 = bin_of_frequency(f2, delta_f)? as i64;
    let max = max_order as i64;

    let mut candidates: Vec<(i64, ComponentKind, u32, (i32, i32))> = Vec::new();
    for n in 1..=max {
        candidates.push((n * b1, ComponentKind::HarmonicF1, n as u32, (n as i32, 0)));
        candidates.push((n * b2, ComponentKind::HarmonicF2, n as u32, (0, n as i32)));
    }
    for n in 1..max {
        for m in 1..=(max - n) {
            let order = (n + m) as u32;
            candidates.push((n * b1 + m * b2, ComponentKind::Intermodulation, order, (n as i32, m as i32)));
            candidates.push((n * b1 - m * b2, ComponentKind::Intermodulation, order, (n as i32, -(m as i32))));
        }
    }

    let mut best: std::collections::BTreeMap<usize, (u32, ComponentKind, (i32, i32))> = Default::default();
    for (signed_bin, kind, order, coeffs) in candidates {
        let bin = signed_bin.unsigned_abs() as usize;
        let frequency = bin as f64 * delta_f;
        if bin == 0 || frequency >= nyquist {
            continue;
        }
        let entry = (order, kind, coeffs);
        match best.get(&bin) {
            Some(existing) if (existing.0, existing.1) <= (order, kind) => {}
            _ => {
                best.insert(bin, entry);
            }
        }
    }

    let components = best
        .into_iter()
        .map(|(bin, (order, kind, coefficients))| Component {
            frequency: bin as f64 * delta_f,
            bin,
            kind,
            order,
            coefficients,
        })
        .collect();
    Ok(ComponentSet {
        f1,
        f2,
        max_order,
        delta_f,
        components,
    })
}

/// Bins averaged into the baseline of `bin`.
///
/// Offsets are visited nearest first. A candidate that is out of range,
/// excluded, equal to the target or already taken is replaced by the next
/// farther bin on the same side, searching at most `|offset| + 2` extra steps.
pub fn baseline_bins(spec: &Spectrum, bin: usize, offsets: &[i32], exclusion: &BTreeSet<usize>) -> Result<Vec<usize>> {
    if bin >= spec.len() {
        return Err(Error::arg(format!(
            "bin {bin} out of range (spectrum has {} bins)",
            spec.len()
        )));
    }
    if offsets.contains(&0) {
        return Err(Error::arg("baseline offsets must be nonzero"));
    }
    let mut ordered: Vec<i32> = offsets.to_vec();
    ordered.sort_by_key(|o| (o.unsigned_abs(), *o));

    let last = spec.len() as i64 - 1;
    let mut chosen: Vec<usize> = Vec::with_capacity(offsets.len());
    for o in ordered {
        let side = o.signum() as i64;
        let max_extra = o.unsigned_abs() as i64 + 2;
        for step in 0..=max_extra {
            let cand = bin as i64 + o as i64 + side * step;
            if cand < 0 || cand > last {
                continue;
            }
            let cand = cand as usize;
            if cand == bin || exclusion.contains(&cand) || chosen.contains(&cand) {
                continue;
            }
            chosen.push(cand);
            break;
        }
    }
    if chosen.len() < 2 {
        return Err(Error::InvalidBaseline {
            bin,
            valid: chosen.len(),
        });
    }
    Ok(chosen)
}

/// Mean amplitude over [`baseline_bins`].
pub fn baseline_at_bin(spec: &Spectrum, bin: usize, offsets: &[i32], exclusion: &BTreeSet<usize>) -> Result<f64> {
    if bin == 0 {
        return Err(Error::arg("the DC bin is never an analysis target"));
    }
    let bins = baseline_bins(spec, bin, offsets, exclusion)?;
    Ok(bins.iter().map(|&b| spec.amplitude(b)).sum::<f64>() / bins.len() as f64)
}

/// `amplitude(bin) / max(baseline, SNR_EPSILON)`.
///
/// The target may itself belong to `exclusion` (component bins are both
/// targets and excluded from every baseline).
pub fn snr_at_bin(spec: &Spectrum, bin: usize, offsets: &[i32], exclusion: &BTreeSet<usize>) -> Result<f64> {
    let baseline = baseline_at_bin(spec, bin, offsets, exclusion)?;
    Ok(spec.amplitude(bin) / baseline.max(SNR_EPSILON))
}

/// `amplitude(bin) - baseline`; may be negative.
pub fn sns_at_bin(spec: &Spectrum, bin: usize, offsets: &[i32], exclusion: &BTreeSet<usize>) -> Result<f64> {
    let baseline = baseline_at_bin(spec, bin, offsets, exclusion)?;
    Ok(spec.amplitude(bin) - baseline)
}

/// SNR and SNS at one bin, or why they are undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BinScore {
    Valid { snr: f64, sns: f64 },
    InvalidBaseline { valid_bins: usize },
}

impl BinScore {
    pub fn snr(&self) -> Option<f64> {
        match self {
            BinScore::Valid { snr, .. } => Some(*snr),
            BinScore::InvalidBaseline { .. } => None,
        }
    }

    pub fn sns(&self) -> Option<f64> {
        match self {
            BinScore::Valid { sns, .. } => Some(*sns),
            BinScore::InvalidBaseline { .. } => None,
        }
    }
}

/// Scores `bin`, folding an invalid baseline into [`BinScore::InvalidBaseline`].
pub fn score_bin(spec: &Spectrum, bin: usize, offsets: &[i32], exclusion: &BTreeSet<usize>) -> Result<BinScore> {
    match baseline_at_bin(spec, bin, offsets, exclusion) {
        Ok(baseline) => {
            let a = spec.amplitude(bin);
            Ok(BinScore::Valid {
                snr: a / baseline.max(SNR_EPSILON),
                sns: a - baseline,
            })
        }
        Err(Error::InvalidBaseline { valid, .. }) => Ok(BinScore::InvalidBaseline { valid_bins: valid }),
        Err(e) => Err(e),
    }
}

/// Per-component scores of one spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrProfile {
    pub baseline_offsets: Vec<i32>,
    pub exclusion: BTreeSet<usize>,
    /// Parallel to the component set's entries.
    pub scores: Vec<BinScore>,
}

impl SnrProfile {
    /// Scores every component with the default exclusion set.
    pub fn compute(spec: &Spectrum, components: &ComponentSet, offsets: &[i32]) -> Result<Self> {
        if (spec.delta_f() - components.delta_f).abs() > ALIGNMENT_TOL * components.delta_f {
            return Err(Error::arg(format!(
                "spectrum resolution {} Hz differs from component grid {} Hz",
                spec.delta_f(),
                components.delta_f
            )));
        }
        let exclusion = components.default_exclusion();
        let scores = components
            .components
            .iter()
            .map(|c| score_bin(spec, c.bin, offsets, &exclusion))
            .collect::<Result<_>>()?;
        Ok(SnrProfile {
            baseline_offsets: offsets.to_vec(),
            exclusion,
            scores,
        })
    }
}
