//! Detector abstraction: an oracle that reads ground truth, and a noisy
//! variant that perturbs it the way an imperfect model would.
//!
//! [`DetectionSet`] is also the JSON import format for detections produced
//! by an external model.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::font::ALPHABET;
use crate::geometry::{PixelBox, Point2};
use crate::quadfit::BinaryMask;
use crate::seeds;
use crate::synthgen::GroundTruth;

pub const EMBEDDING_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionClass {
    TickLabel,
    Mark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: usize,
    pub class: DetectionClass,
    pub bbox: PixelBox,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerEvidence {
    /// Top-left, bottom-left, bottom-right, top-right.
    Keypoints([Point2; 4]),
    Mask(BinaryMask),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerMode {
    #[default]
    Keypoint,
    Mask,
}

impl std::str::FromStr for CornerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keypoint" => Ok(Self::Keypoint),
            "mask" => Ok(Self::Mask),
            _ => Err(format!("unknown corner mode {s:?} (expected keypoint or mask)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
    pub corners: CornerEvidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub box_jitter_sigma: f64,
    pub drop_prob: f64,
    pub spurious_prob: f64,
    pub ocr_char_sub_prob: f64,
    pub corner_jitter_sigma: f64,
    pub embedding_noise_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            box_jitter_sigma: 0.0,
            drop_prob: 0.0,
            spurious_prob: 0.0,
            ocr_char_sub_prob: 0.0,
            corner_jitter_sigma: 0.0,
            embedding_noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// Frozen reference model for robustness regression runs.
    pub fn reference() -> Self {
        Self {
            box_jitter_sigma: 2.0,
            drop_prob: 0.02,
            spurious_prob: 0.02,
            ocr_char_sub_prob: 0.05,
            corner_jitter_sigma: 2.0,
            embedding_noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in
            [("drop_prob", self.drop_prob), ("spurious_prob", self.spurious_prob), ("ocr_char_sub_prob", self.ocr_char_sub_prob)]
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        for (name, s) in [
            ("box_jitter_sigma", self.box_jitter_sigma),
            ("corner_jitter_sigma", self.corner_jitter_sigma),
            ("embedding_noise_sigma", self.embedding_noise_sigma),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(format!("{name} = {s} must be a finite non-negative number"));
            }
        }
        Ok(())
    }

    /// Reads a model from TOML (`.toml`) or JSON; missing fields are zero.
    pub fn from_path(path: &std::path::Path) -> Result<Self, crate::config::ConfigError> {
        let model: Self = crate::config::read_config(path)?;
        model.validate().map_err(crate::config::ConfigError::Invalid)?;
        Ok(model)
    }

    pub fn is_zero(&self) -> bool {
        self.box_jitter_sigma == 0.0
            && self.drop_prob == 0.0
            && self.spurious_prob == 0.0
            && self.ocr_char_sub_prob == 0.0
            && self.corner_jitter_sigma == 0.0
            && self.embedding_noise_sigma == 0.0
    }
}

/// Unit vector `e_k` of the fixed orthonormal family; series beyond the
/// embedding dimension wrap around.
pub fn series_embedding(series_id: usize) -> Vec<f64> {
    let mut e = vec![0.0; EMBEDDING_DIM];
    e[series_id % EMBEDDING_DIM] = 1.0;
    e
}

fn corner_evidence(corners: [Point2; 4], mode: CornerMode, dims: (usize, usize)) -> CornerEvidence {
    match mode {
        CornerMode::Keypoint => CornerEvidence::Keypoints(corners),
        CornerMode::Mask => CornerEvidence::Mask(BinaryMask::from_polygon(dims.0, dims.1, &corners)),
    }
}

/// One exact detection per annotation: labels first, then marks.
pub fn oracle_detect(gt: &GroundTruth, mode: CornerMode) -> DetectionSet {
    let labels = gt.label_annotations.iter().map(|l| Detection {
        id: 0,
        class: DetectionClass::TickLabel,
        bbox: l.bbox,
        score: 1.0,
        text: Some(l.text.clone()),
        embedding: None,
        series_id: None,
    });
    let marks = gt.mark_annotations.iter().map(|m| Detection {
        id: 0,
        class: DetectionClass::Mark,
        bbox: m.bbox,
        score: 1.0,
        text: None,
        embedding: Some(series_embedding(m.series_id)),
        series_id: Some(m.series_id),
    });
    let mut detections: Vec<Detection> = labels.chain(marks).collect();
    for (i, d) in detections.iter_mut().enumerate() {
        d.id = i;
    }
    DetectionSet { detections, corners: corner_evidence(gt.corners, mode, (gt.width, gt.height)) }
}

fn substitute_chars<R: Rng>(text: &str, p: f64, rng: &mut R) -> String {
    let alphabet: Vec<char> = ALPHABET.chars().collect();
    text.chars()
        .map(|c| {
            if !rng.random_bool(p) {
                return c;
            }
            let others: Vec<char> = alphabet.iter().copied().filter(|&a| a != c).collect();
            others[rng.random_range(0..others.len())]
        })
        .collect()
}

fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
}

/// Oracle output perturbed by `noise`; deterministic in `noise.seed`.
///
/// Every perturbation whose parameter is zero is skipped without consuming
/// randomness, so an all-zero model reproduces [`oracle_detect`].
pub fn noisy_detect(gt: &GroundTruth, noise: &NoiseModel, mode: CornerMode) -> DetectionSet {
    let oracle = oracle_detect(gt, CornerMode::Keypoint);
    let mut rng = seeds::rng(noise.seed);
    let (w, h) = (gt.width as f64, gt.height as f64);

    let mut out = Vec::with_capacity(oracle.detections.len());
    for det in &oracle.detections {
        if noise.spurious_prob > 0.0 && rng.random_bool(noise.spurious_prob) {
            let (hw, hh) = (det.bbox.width() / 2.0, det.bbox.height() / 2.0);
            let c = Point2::new(rng.random_range(hw..=w - hw), rng.random_range(hh..=h - hh));
            let mut fake = Detection { bbox: PixelBox::centered(c, hw, hh), score: 0.5, ..det.clone() };
            match det.class {
                DetectionClass::TickLabel => {
                    let donor = &gt.label_annotations[rng.random_range(0..gt.label_annotations.len())];
                    fake.text = Some(donor.text.clone());
                }
                DetectionClass::Mark if !gt.raw_series.is_empty() => {
                    let sid = rng.random_range(0..gt.raw_series.len());
                    fake.series_id = Some(sid);
                    fake.embedding = Some(series_embedding(sid));
                }
                DetectionClass::Mark => {}
            }
            out.push(fake);
        }
        if noise.drop_prob > 0.0 && rng.random_bool(noise.drop_prob) {
            continue;
        }
        out.push(det.clone());
    }

    for det in &mut out {
        if noise.box_jitter_sigma > 0.0 {
            let s = noise.box_jitter_sigma;
            let b = det.bbox;
            det.bbox = PixelBox::new(
                b.x0 + gaussian(&mut rng, s),
                b.y0 + gaussian(&mut rng, s),
                b.x1 + gaussian(&mut rng, s),
                b.y1 + gaussian(&mut rng, s),
            );
        }
        if noise.ocr_char_sub_prob > 0.0 {
            if let Some(t) = &det.text {
                det.text = Some(substitute_chars(t, noise.ocr_char_sub_prob, &mut rng));
            }
        }
        if noise.embedding_noise_sigma > 0.0 {
            if let Some(e) = &mut det.embedding {
                for v in e.iter_mut() {
                    *v += gaussian(&mut rng, noise.embedding_noise_sigma);
                }
                let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    e.iter_mut().for_each(|v| *v /= norm);
                }
            }
        }
    }
    for (i, d) in out.iter_mut().enumerate() {
        d.id = i;
    }

    let mut corners = gt.corners;
    if noise.corner_jitter_sigma > 0.0 {
        for c in &mut corners {
            c.x += gaussian(&mut rng, noise.corner_jitter_sigma);
            c.y += gaussian(&mut rng, noise.corner_jitter_sigma);
        }
    }
    DetectionSet { detections: out, corners: corner_evidence(corners, mode, (gt.width, gt.height)) }
}
