//! Frequency-tagged stimulus generation.
//!
//! Every tagged region of a source image is multiplied, frame by frame, by a
//! contrast coefficient that follows a sinusoid at the region's tag frequency,
//! mapped affinely onto `[contrast_min, contrast_max]`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the "is an integer" checks on `fps × duration` and
/// `f × duration`.
const INTEGRALITY_TOL: f64 = 1e-9;

/// Label of one tagged image region.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub String);

impl RegionId {
    pub fn new(id: impl Into<String>) -> Self {
        RegionId(id.into())
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFrequency {
    pub region: RegionId,
    /// Tag frequency in Hz.
    pub frequency: f64,
}

/// Stimulus timing and contrast parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggingConfig {
    /// Frames per second (Hz).
    pub fps: f64,
    /// Sequence duration in seconds.
    pub duration: f64,
    /// Sinusoid phase in radians.
    pub phase: f64,
    pub contrast_min: f64,
    pub contrast_max: f64,
    pub region_freqs: Vec<RegionFrequency>,
}

impl Default for TaggingConfig {
    fn default() -> Self {
        TaggingConfig {
            fps: 120.0,
            duration: 2.0,
            phase: 0.0,
            contrast_min: 0.5,
            contrast_max: 1.0,
            region_freqs: vec![
                RegionFrequency {
                    region: RegionId::new("L"),
                    frequency: 6.0,
                },
                RegionFrequency {
                    region: RegionId::new("R"),
                    frequency: 7.5,
                },
            ],
        }
    }
}

impl TaggingConfig {
    /// Checks every invariant: positive integral frame count, coherent and
    /// sub-Nyquist tag frequencies, a proper contrast interval and distinct
    /// positive frequencies.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::arg(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::arg(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        let samples = self.fps * self.duration;
        if (samples - samples.round()).abs() > INTEGRALITY_TOL || samples.round() < 1.0 {
            return Err(Error::arg(format!(
                "fps x duration = {samples} is not a positive integer frame count"
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::arg("phase must be finite"));
        }
        if !(0.0 <= self.contrast_min
            && self.contrast_min < self.contrast_max
            && self.contrast_max <= 1.0)
        {
            return Err(Error::arg(format!(
                "contrast range must satisfy 0 <= min < max <= 1, got [{}, {}]",
                self.contrast_min, self.contrast_max
            )));
        }
        if self.region_freqs.is_empty() {
            return Err(Error::arg("at least one tagged region is required"));
        }
        for (k, rf) in self.region_freqs.iter().enumerate() {
            let f = rf.frequency;
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::arg(format!(
                    "region {} frequency must be positive, got {f}",
                    rf.region
                )));
            }
            let cycles = f * self.duration;
            if (cycles - cycles.round()).abs() > INTEGRALITY_TOL {
                return Err(Error::Alignment {
                    frequency: f,
                    delta_f: self.delta_f(),
                });
            }
            if f >= self.fps / 2.0 {
                return Err(Error::arg(format!(
                    "region {} frequency {f} Hz is not below Nyquist ({} Hz)",
                    rf.region,
                    self.fps / 2.0
                )));
            }
            for other in &self.region_freqs[..k] {
                if other.region == rf.region {
                    return Err(Error::arg(format!("region {} tagged twice", rf.region)));
                }
                if other.frequency == f {
                    return Err(Error::arg(format!(
                        "regions {} and {} share frequency {f} Hz",
                        other.region, rf.region
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of frames, `round(fps × duration)`.
    pub fn frame_count(&self) -> usize {
        (self.fps * self.duration).round() as usize
    }

    /// Spectral bin spacing of a trace sampled once per frame.
    pub fn delta_f(&self) -> f64 {
        1.0 / self.duration
    }

    pub fn frequency_of(&self, region: &RegionId) -> Option<f64> {
        self.region_freqs
            .iter()
            .find(|rf| &rf.region == region)
            .map(|rf| rf.frequency)
    }
}

/// Contrast coefficient applied at frame `i` to a region tagged at `f` Hz.
///
/// `c_i = c_min + (c_max - c_min) * (sin(w_i) + 1) / 2` with
/// `w_i = 2 pi f i / fps + phase`.
pub fn contrast_coefficient(f: f64, i: usize, cfg: &TaggingConfig) -> Result<f64> {
    if i >= cfg.frame_count() {
        return Err(Error::arg(format!(
            "frame index {i} out of range (frame count {})",
            cfg.frame_count()
        )));
    }
    if !cfg.region_freqs.iter().any(|rf| rf.frequency == f) {
        return Err(Error::arg(format!("{f} Hz is not a tagged frequency")));
    }
    Ok(coefficient_unchecked(f, i, cfg))
}

fn coefficient_unchecked(f: f64, i: usize, cfg: &TaggingConfig) -> f64 {
    let omega = 2.0 * PI * f * i as f64 / cfg.fps + cfg.phase;
    cfg.contrast_min + (cfg.contrast_max - cfg.contrast_min) * (omega.sin() + 1.0) / 2.0
}

/// An RGB image with channel-planar (CHW) storage and values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl SourceImage {
    pub const CHANNELS: usize = 3;

    /// Builds an image from CHW data, rejecting values outside `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::arg("image dimensions must be nonzero"));
        }
        if data.len() != Self::CHANNELS * width * height {
            return Err(Error::arg(format!(
                "expected {} values for a {width}x{height}x3 image, got {}",
                Self::CHANNELS * width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::arg(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(SourceImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; Self::CHANNELS * width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// CHW pixel data.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.data[(channel * self.height + y) * self.width + x]
    }
}

/// Per-pixel region assignment. `None` marks an untagged pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    regions: Vec<RegionId>,
    assignment: Vec<Option<u16>>,
}

impl RegionMask {
    /// Builds a mask from a per-pixel (row-major) label list.
    pub fn from_labels(width: usize, height: usize, labels: &[Option<RegionId>]) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::arg(format!(
                "mask has {} labels for a {width}x{height} grid",
                labels.len()
            )));
        }
        let mut regions: Vec<RegionId> = Vec::new();
        let mut assignment = Vec::with_capacity(labels.len());
        for label in labels {
            assignment.push(match label {
                None => None,
                Some(id) => {
                    let idx = match regions.iter().position(|r| r == id) {
                        Some(idx) => idx,
                        None => {
                            regions.push(id.clone());
                            regions.len() - 1
                        }
                    };
                    Some(idx as u16)
                }
            });
        }
        Ok(RegionMask {
            width,
            height,
            regions,
            assignment,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn label(&self, y: usize, x: usize) -> Option<&RegionId> {
        self.assignment[y * self.width + x].map(|idx| &self.regions[idx as usize])
    }

    /// Distinct region labels in first-appearance order.
    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn count(&self, region: &RegionId) -> usize {
        match self.regions.iter().position(|r| r == region) {
            Some(idx) => self
                .assignment
                .iter()
                .filter(|a| **a == Some(idx as u16))
                .count(),
            None => 0,
        }
    }
}

/// Left/right split: columns `[0, width/2)` are region `L`, the rest `R`.
pub fn default_half_mask(width: usize, height: usize) -> Result<RegionMask> {
    if width < 2 {
        return Err(Error::arg(format!(
            "cannot split an image of width {width} into halves"
        )));
    }
    let left = RegionId::new("L");
    let right = RegionId::new("R");
    let split = width / 2;
    let labels: Vec<Option<RegionId>> = (0..height)
        .flat_map(|_| 0..width)
        .map(|x| Some(if x < split { left.clone() } else { right.clone() }))
        .collect();
    RegionMask::from_labels(width, height, &labels)
}

/// A tagged frame sequence.
///
/// Frames are generated on demand from the source image and a precomputed
/// coefficient table; [`FrameSequence::frame`] and
/// [`FrameSequence::to_frames`] produce identical values.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    source: SourceImage,
    mask: RegionMask,
    config: TaggingConfig,
    /// `coefficients[i][r]` is the coefficient of mask region `r` at frame `i`.
    coefficients: Vec<Vec<f64>>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn config(&self) -> &TaggingConfig {
        &self.config
    }

    pub fn mask(&self) -> &RegionMask {
        &self.mask
    }

    pub fn source(&self) -> &SourceImage {
        &self.source
    }

    /// Coefficient applied to `region` at frame `i` (1.0 for unknown regions).
    pub fn coefficient(&self, i: usize, region: &RegionId) -> f64 {
        self.mask
            .regions
            .iter()
            .position(|r| r == region)
            .map_or(1.0, |idx| self.coefficients[i][idx])
    }

    /// Materializes frame `i`.
    pub fn frame(&self, i: usize) -> SourceImage {
        let coeffs = &self.coefficients[i];
        let plane = self.source.width * self.source.height;
        let mut data = Vec::with_capacity(self.source.data.len());
        for c in 0..SourceImage::CHANNELS {
            let src = &self.source.data[c * plane..(c + 1) * plane];
            data.extend(src.iter().zip(&self.mask.assignment).map(|(&v, a)| match a {
                Some(r) => (v as f64 * coeffs[*r as usize]) as f32,
                None => v,
            }));
        }
        SourceImage {
            width: self.source.width,
            height: self.source.height,
            data,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SourceImage> + '_ {
        (0..self.len()).map(move |i| self.frame(i))
    }

    pub fn to_frames(&self) -> Vec<SourceImage> {
        self.iter().collect()
    }

    /// Writes every frame as an 8-bit RGB PNG (`frame_0000.png`, ...) for
    /// visual inspection. Values are rounded half away from zero.
    pub fn dump_png(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let (w, h) = (self.source.width, self.source.height);
        for i in 0..self.len() {
            let frame = self.frame(i);
            let mut img = image::RgbImage::new(w as u32, h as u32);
            for y in 0..h {
                for x in 0..w {
                    let px = std::array::from_fn(|c| to_byte(frame.get(c, y, x)));
                    img.put_pixel(x as u32, y as u32, image::Rgb(px));
                }
            }
            img.save(dir.join(format!("frame_{i:04}.png")))
                .map_err(|e| Error::format(format!("png encode: {e}")))?;
        }
        Ok(())
    }
}

fn to_byte(v: f32) -> u8 {
    (v as f64 * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Tags `img` region-wise according to `mask` and `cfg`.
///
/// Pixels in a region without a configured frequency, and untagged pixels,
/// keep their source value in every frame.
pub fn tag_image_sequence(
    img: &SourceImage,
    mask: &RegionMask,
    cfg: &TaggingConfig,
) -> Result<FrameSequence> {
    if img.width != mask.width || img.height != mask.height {
        return Err(Error::arg(format!(
            "mask is {}x{} but image is {}x{}",
            mask.width, mask.height, img.width, img.height
        )));
    }
    cfg.validate()?;
    let freqs: Vec<Option<f64>> = mask.regions.iter().map(|r| cfg.frequency_of(r)).collect();
    let coefficients = (0..cfg.frame_count())
        .map(|i| {
            freqs
                .iter()
                .map(|f| f.map_or(1.0, |f| coefficient_unchecked(f, i, cfg)))
                .collect()
        })
        .collect();
    Ok(FrameSequence {
        source: img.clone(),
        mask: mask.clone(),
        config: cfg.clone(),
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = TaggingConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.frame_count(), 240);
        assert_eq!(cfg.delta_f(), 0.5);
    }

    #[test]
    fn coefficient_examples() {
        let cfg = TaggingConfig::default();
        assert!(close(contrast_coefficient(6.0, 0, &cfg).unwrap(), 0.75));
        assert!(close(contrast_coefficient(6.0, 5, &cfg).unwrap(), 1.0));
        assert!(close(contrast_coefficient(6.0, 15, &cfg).unwrap(), 0.5));
    }

    #[test]
    fn coefficient_rejects_bad_index_and_untagged_frequency() {
        let cfg = TaggingConfig::default();
        assert!(matches!(
            contrast_coefficient(6.0, 240, &cfg),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            contrast_coefficient(5.0, 0, &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn incoherent_frequency_is_alignment_error() {
        let mut cfg = TaggingConfig::default();
        cfg.region_freqs[0].frequency = 6.3;
        assert!(matches!(cfg.validate(), Err(Error::Alignment { .. })));
    }

    #[test]
    fn config_invariants() {
        let mut cfg = TaggingConfig::default();
        cfg.region_freqs[1].frequency = 60.0;
        assert!(cfg.validate().is_err(), "Nyquist");

        let mut cfg = TaggingConfig::default();
        cfg.region_freqs[1].frequency = 6.0;
        assert!(cfg.validate().is_err(), "duplicate frequency");

        let cfg = TaggingConfig {
            contrast_min: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err(), "empty contrast range");

        let cfg = TaggingConfig {
            duration: 2.001,
            ..Default::default()
        };
        assert!(cfg.validate().is_err(), "non-integral frame count");
    }

    #[test]
    fn half_mask_examples() {
        let m = default_half_mask(32, 32).unwrap();
        assert_eq!(m.count(&RegionId::new("L")), 16 * 32);
        assert_eq!(m.count(&RegionId::new("R")), 16 * 32);

        let m = default_half_mask(33, 1).unwrap();
        assert_eq!(m.count(&RegionId::new("L")), 16);
        assert_eq!(m.count(&RegionId::new("R")), 17);
        assert_eq!(m.label(0, 15).unwrap().0, "L");
        assert_eq!(m.label(0, 16).unwrap().0, "R");

        assert!(default_half_mask(1, 8).is_err());
    }

    #[test]
    fn tagging_examples() {
        let cfg = TaggingConfig::default();
        let mask = default_half_mask(8, 4).unwrap();

        let zero = SourceImage::filled(8, 4, 0.0).unwrap();
        let seq = tag_image_sequence(&zero, &mask, &cfg).unwrap();
        assert_eq!(seq.len(), 240);
        assert!(seq.iter().all(|f| f.data().iter().all(|&v| v == 0.0)));

        let one = SourceImage::filled(8, 4, 1.0).unwrap();
        let single = TaggingConfig {
            region_freqs: vec![RegionFrequency {
                region: RegionId::new("L"),
                frequency: 6.0,
            }],
            ..TaggingConfig::default()
        };
        let all_l = RegionMask::from_labels(8, 4, &vec![Some(RegionId::new("L")); 32]).unwrap();
        let seq = tag_image_sequence(&one, &all_l, &single).unwrap();
        assert!(seq.frame(5).data().iter().all(|&v| v == 1.0));

        let grey = SourceImage::filled(8, 4, 0.8).unwrap();
        let seq = tag_image_sequence(&grey, &mask, &cfg).unwrap();
        let expected = (0.8f32 as f64 * 0.75) as f32;
        assert!(seq.frame(0).data().iter().all(|&v| v == expected));
        assert!((expected - 0.6).abs() < 1e-7);
    }

    #[test]
    fn untagged_pixels_are_copied() {
        let cfg = TaggingConfig::default();
        let mut labels = vec![Some(RegionId::new("L")); 4];
        labels[3] = None;
        let mask = RegionMask::from_labels(2, 2, &labels).unwrap();
        let img = SourceImage::filled(2, 2, 0.4).unwrap();
        let seq = tag_image_sequence(&img, &mask, &cfg).unwrap();
        for frame in seq.iter() {
            for c in 0..3 {
                assert_eq!(frame.get(c, 1, 1), 0.4);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cfg = TaggingConfig::default();
        let mask = default_half_mask(8, 8).unwrap();
        let img = SourceImage::filled(8, 4, 0.5).unwrap();
        assert!(matches!(
            tag_image_sequence(&img, &mask, &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn png_dump_writes_one_file_per_frame() {
        let cfg = TaggingConfig {
            fps: 8.0,
            duration: 1.0,
            region_freqs: vec![RegionFrequency {
                region: RegionId::new("L"),
                frequency: 2.0,
            }],
            ..TaggingConfig::default()
        };
        let img = SourceImage::filled(4, 2, 1.0).unwrap();
        let seq = tag_image_sequence(&img, &default_half_mask(4, 2).unwrap(), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        seq.dump_png(dir.path()).unwrap();
        let decoded = image::open(dir.path().join("frame_0002.png")).unwrap().to_rgb8();
        // frame 2 of a 2 Hz tag at 8 fps: sin(pi) = 0 -> coefficient 0.75
        assert_eq!(decoded.get_pixel(0, 0).0, [191, 191, 191]);
        assert_eq!(decoded.get_pixel(3, 0).0, [255, 255, 255]);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 8);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn coefficients_are_bounded_and_periodic(
                f_idx in 0usize..2,
                i in 0usize..240,
            ) {
                let cfg = TaggingConfig::default();
                let f = cfg.region_freqs[f_idx].frequency;
                let c = contrast_coefficient(f, i, &cfg).unwrap();
                prop_assert!((cfg.contrast_min..=cfg.contrast_max).contains(&c));
                let period = cfg.fps / f;
                if (period - period.round()).abs() < 1e-12 {
                    let j = i + period.round() as usize;
                    if j < cfg.frame_count() {
                        let c2 = contrast_coefficient(f, j, &cfg).unwrap();
                        prop_assert!((c - c2).abs() < 1e-12);
                    }
                }
            }

            #[test]
            fn frame_pixels_stay_within_scaled_source(
                seed_vals in proptest::collection::vec(0.0f32..=1.0, 3 * 4 * 4),
                i in 0usize..240,
            ) {
                let cfg = TaggingConfig::default();
                let img = SourceImage::new(4, 4, seed_vals).unwrap();
                let seq = tag_image_sequence(&img, &default_half_mask(4, 4).unwrap(), &cfg).unwrap();
                let frame = seq.frame(i);
                for (&v, &s) in frame.data().iter().zip(img.data()) {
                    prop_assert!(v <= s);
                    prop_assert!(v as f64 >= cfg.contrast_min * s as f64 - 1e-7);
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
