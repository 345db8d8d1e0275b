//! Batch orchestration: generate → detect → extract → evaluate, in memory
//! or against an on-disk dataset directory.
//!
//! Dataset layout under the output root:
//!
//! ```text
//! dataset.json            run parameters (seed, count, profile, augmentation)
//! manifest.jsonl          one ManifestEntry per image
//! clean/NNNNN.{png,json}  rendered chart and its ground truth
//! augmented/NNNNN.{png,json}
//! detections/NNNNN.json   DetectionSet used for extraction
//! predictions/NNNNN.json  PredictionRecord
//! eval.jsonl              per-image EvalRecord
//! overlays/NNNNN.png
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{self, AugmentConfig};
use crate::calibrate::{self, ExtractParams, Extraction, Stage};
use crate::detect::{self, CornerEvidence, CornerMode, DetectionClass, DetectionSet, NoiseModel};
use crate::geometry::{self, Point2};
use crate::metric::{self, MatchCounts, MatchReport, Tolerance};
use crate::quadfit;
use crate::raster::{RasterImage, Rgb};
use crate::seeds;
use crate::synthgen::{self, ChartSpec, DomainProfile, GroundTruth};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("missing input: {0}")]
    Missing(String),
    #[error("manifest mismatch: {0}")]
    Mismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn fmt_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Format { path: path.to_path_buf(), message: e.to_string() }
}

/// One generated chart, clean and (optionally) augmented.
#[derive(Debug, Clone)]
pub struct Sample {
    pub index: u64,
    pub spec: ChartSpec,
    pub clean_image: RasterImage,
    pub clean_gt: GroundTruth,
    pub augmented: Option<(RasterImage, GroundTruth)>,
}

impl Sample {
    /// The ground truth the detector sees: augmented when present.
    pub fn gt(&self) -> &GroundTruth {
        self.augmented.as_ref().map_or(&self.clean_gt, |a| &a.1)
    }

    pub fn image(&self) -> &RasterImage {
        self.augmented.as_ref().map_or(&self.clean_image, |a| &a.0)
    }
}

/// Augmentation config with its seed replaced by the per-image derivation.
pub fn augment_config_for(cfg: &AugmentConfig, master_seed: u64, index: u64) -> AugmentConfig {
    AugmentConfig { seed: seeds::derive_seed(master_seed ^ cfg.seed, index, "augment"), ..cfg.clone() }
}

pub fn generate_sample(master_seed: u64, index: u64, profile: DomainProfile, aug: Option<&AugmentConfig>) -> Sample {
    let spec = synthgen::sample_spec(master_seed, index, profile);
    let (clean_image, clean_gt) = synthgen::render_chart(&spec);
    let augmented = aug.map(|cfg| augment::augment(&clean_image, &clean_gt, &augment_config_for(cfg, master_seed, index)));
    Sample { index, spec, clean_image, clean_gt, augmented }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detector {
    Oracle,
    Noisy {
        noise: NoiseModel,
    },
    /// Detections read from `<dir>/NNNNN.json`.
    Imported {
        dir: PathBuf,
    },
}

/// Noise model with its seed replaced by the per-image derivation.
pub fn noise_for(noise: &NoiseModel, master_seed: u64, index: u64) -> NoiseModel {
    NoiseModel { seed: seeds::derive_seed(master_seed ^ noise.seed, index, "detect"), ..*noise }
}

pub fn simulate_detections(
    gt: &GroundTruth,
    detector: &Detector,
    mode: CornerMode,
    master_seed: u64,
    index: u64,
) -> Result<DetectionSet, PipelineError> {
    match detector {
        Detector::Oracle => Ok(detect::oracle_detect(gt, mode)),
        Detector::Noisy { noise } => Ok(detect::noisy_detect(gt, &noise_for(noise, master_seed, index), mode)),
        Detector::Imported { dir } => read_json(&dir.join(format!("{index:05}.json"))),
    }
}

pub fn extract_params_for(gt: &GroundTruth) -> ExtractParams {
    ExtractParams { log_x: gt.log_x, image_dims: (gt.width, gt.height), ..ExtractParams::default() }
}

/// Default scoring rule per profile: 5% relative, or 5 dB absolute with
/// categorical frequency bins for audiograms.
pub fn default_tolerance(profile: DomainProfile) -> Tolerance {
    match profile {
        DomainProfile::General => Tolerance::relative(0.05),
        DomainProfile::Audiogram => Tolerance::absolute(5.0).with_categorical_x(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PredictionRecord {
    Ok { index: u64, extraction: Extraction },
    Error { index: u64, stage: Stage, kind: String, message: String },
}

impl PredictionRecord {
    pub fn index(&self) -> u64 {
        match self {
            PredictionRecord::Ok { index, .. } | PredictionRecord::Error { index, .. } => *index,
        }
    }

    pub fn lines(&self) -> &[Vec<(f64, f64)>] {
        match self {
            PredictionRecord::Ok { extraction, .. } => &extraction.series.lines,
            PredictionRecord::Error { .. } => &[],
        }
    }
}

pub fn run_extraction(index: u64, dets: &DetectionSet, params: &ExtractParams) -> PredictionRecord {
    match calibrate::extract_series(&dets.detections, &dets.corners, params) {
        Ok(extraction) => PredictionRecord::Ok { index, extraction },
        Err(e) => PredictionRecord::Error { index, stage: e.stage, kind: e.kind(), message: e.to_string() },
    }
}

/// Scores a prediction; failed extractions count as empty predictions.
pub fn score(pred: &PredictionRecord, gt: &GroundTruth, tol: &Tolerance) -> Result<MatchReport, metric::MetricError> {
    metric::evaluate(pred.lines(), &gt.raw_series, tol)
}

/// Everything needed to run the in-memory benchmark loop.
#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub master_seed: u64,
    pub count: u64,
    pub profile: DomainProfile,
    pub augment: Option<AugmentConfig>,
    pub detector: Detector,
    pub corner_mode: CornerMode,
}

#[derive(Debug, Clone)]
pub struct ImageResult {
    pub index: u64,
    pub gt: GroundTruth,
    pub prediction: PredictionRecord,
}

/// Generates, detects and extracts every image of a batch in parallel.
pub fn run_batch(cfg: &BatchConfig) -> Result<Vec<ImageResult>, PipelineError> {
    (0..cfg.count)
        .into_par_iter()
        .map(|index| {
            let sample = generate_sample(cfg.master_seed, index, cfg.profile, cfg.augment.as_ref());
            let gt = sample.gt().clone();
            let dets = simulate_detections(&gt, &cfg.detector, cfg.corner_mode, cfg.master_seed, index)?;
            let prediction = run_extraction(index, &dets, &extract_params_for(&gt));
            Ok(ImageResult { index, gt, prediction })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub images: usize,
    pub failures: usize,
    pub counts: MatchCounts,
    pub precision: f64,
    pub recall: f64,
    /// Micro-averaged over summed counts.
    pub f1: f64,
    /// Mean of per-image F1, for comparison.
    pub macro_f1: f64,
}

pub fn aggregate(results: &[ImageResult], tol: &Tolerance) -> Result<Aggregate, metric::MetricError> {
    let mut counts = MatchCounts::default();
    let mut macro_sum = 0.0;
    let mut failures = 0;
    for r in results {
        let rep = score(&r.prediction, &r.gt, tol)?;
        counts.add_report(&rep);
        macro_sum += rep.f1;
        failures += usize::from(matches!(r.prediction, PredictionRecord::Error { .. }));
    }
    let (precision, recall) = counts.precision_recall();
    Ok(Aggregate {
        images: results.len(),
        failures,
        counts,
        precision,
        recall,
        f1: counts.f1(),
        macro_f1: if results.is_empty() { 0.0 } else { macro_sum / results.len() as f64 },
    })
}

/// `(tolerance magnitude, micro F1)` for each magnitude, same tolerance kind.
pub fn tolerance_sweep(results: &[ImageResult], base: &Tolerance, magnitudes: &[f64]) -> Result<Vec<(f64, f64)>, metric::MetricError> {
    magnitudes.iter().map(|&m| Ok((m, aggregate(results, &Tolerance { magnitude: m, ..*base })?.f1))).collect()
}

// ---------------------------------------------------------------------------
// On-disk datasets

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub seed: u64,
    pub count: u64,
    pub profile: DomainProfile,
    pub augment: Option<AugmentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: u64,
    pub clean_image: String,
    pub clean_gt: String,
    /// Image and ground truth the detector runs on (augmented when present).
    pub image: String,
    pub gt: String,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| fmt_err(path, e))
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension(format!("{}.tmp", path.extension().and_then(|e| e.to_str()).unwrap_or("")));
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| fmt_err(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn write_png(path: &Path, img: &RasterImage) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("png.tmp");
    let enc = image::codecs::png::PngEncoder::new(fs::File::create(&tmp).map_err(io_err(&tmp))?);
    image::ImageEncoder::write_image(enc, &img.pixels, img.width as u32, img.height as u32, image::ExtendedColorType::Rgb8)
        .map_err(|e| fmt_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).map_err(|e| fmt_err(path, e))?;
        buf.write_all(b"\n").map_err(io_err(path))?;
    }
    write_atomic(path, &buf)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(|e| fmt_err(path, e))).collect()
}

fn name(index: u64, ext: &str) -> String {
    format!("{index:05}.{ext}")
}

/// Writes `count` charts (plus augmented variants) and the manifest.
pub fn write_dataset(root: &Path, info: &DatasetInfo) -> Result<Vec<ManifestEntry>, PipelineError> {
    let entries = (0..info.count)
        .into_par_iter()
        .map(|index| {
            let s = generate_sample(info.seed, index, info.profile, info.augment.as_ref());
            let clean_image = format!("clean/{}", name(index, "png"));
            let clean_gt = format!("clean/{}", name(index, "json"));
            write_png(&root.join(&clean_image), &s.clean_image)?;
            write_json(&root.join(&clean_gt), &s.clean_gt)?;
            let (image, gt) = match &s.augmented {
                Some((img, gt)) => {
                    let (i, g) = (format!("augmented/{}", name(index, "png")), format!("augmented/{}", name(index, "json")));
                    write_png(&root.join(&i), img)?;
                    write_json(&root.join(&g), gt)?;
                    (i, g)
                }
                None => (clean_image.clone(), clean_gt.clone()),
            };
            Ok(ManifestEntry { index, clean_image, clean_gt, image, gt })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    write_json(&root.join("dataset.json"), info)?;
    write_jsonl(&root.join("manifest.jsonl"), &entries)?;
    Ok(entries)
}

pub fn read_manifest(root: &Path) -> Result<(DatasetInfo, Vec<ManifestEntry>), PipelineError> {
    let info_path = root.join("dataset.json");
    let manifest = root.join("manifest.jsonl");
    if !manifest.exists() {
        return Err(PipelineError::Missing(format!("no dataset manifest at {}", manifest.display())));
    }
    Ok((read_json(&info_path)?, read_jsonl(&manifest)?))
}

/// Runs the detector and extraction for every manifest entry, writing one
/// detection and one prediction file per image. Failed extractions are
/// recorded, not propagated.
pub fn extract_dataset(root: &Path, detector: &Detector, mode: CornerMode) -> Result<Vec<PredictionRecord>, PipelineError> {
    let (info, entries) = read_manifest(root)?;
    entries
        .par_iter()
        .map(|e| {
            let gt: GroundTruth = read_json(&root.join(&e.gt))?;
            let dets = simulate_detections(&gt, detector, mode, info.seed, e.index)?;
            if !matches!(detector, Detector::Imported { .. }) {
                write_json(&root.join("detections").join(name(e.index, "json")), &dets)?;
            }
            let rec = run_extraction(e.index, &dets, &extract_params_for(&gt));
            write_json(&root.join("predictions").join(name(e.index, "json")), &rec)?;
            Ok(rec)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: u64,
    pub status: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted_points: usize,
    pub gt_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tolerance: Tolerance,
    pub per_image: Vec<EvalRecord>,
    pub aggregate: Aggregate,
    /// `(magnitude, micro F1)` when a sweep was requested.
    pub sweep: Vec<(f64, f64)>,
}

/// Loads ground truth and predictions for every manifest entry.
pub fn load_results(root: &Path) -> Result<Vec<ImageResult>, PipelineError> {
    let (_, entries) = read_manifest(root)?;
    entries
        .iter()
        .map(|e| {
            let gt: GroundTruth = read_json(&root.join(&e.gt))?;
            let pred_path = root.join("predictions").join(name(e.index, "json"));
            if !pred_path.exists() {
                return Err(PipelineError::Missing(format!("prediction for image {} ({})", e.index, pred_path.display())));
            }
            let prediction: PredictionRecord = read_json(&pred_path)?;
            if prediction.index() != e.index {
                return Err(PipelineError::Mismatch(format!(
                    "{} holds image {} but the manifest expects {}",
                    pred_path.display(),
                    prediction.index(),
                    e.index
                )));
            }
            Ok(ImageResult { index: e.index, gt, prediction })
        })
        .collect()
}

/// Scores a dataset and writes `eval.jsonl` (per image, then one aggregate
/// line) and `sweep.csv` when `sweep` is non-empty.
pub fn evaluate_dataset(root: &Path, tol: &Tolerance, sweep: &[f64]) -> Result<EvalReport, PipelineError> {
    let results = load_results(root)?;
    let metric_err = |e: metric::MetricError| fmt_err(root, e);
    let per_image = results
        .iter()
        .map(|r| {
            let rep = score(&r.prediction, &r.gt, tol).map_err(metric_err)?;
            Ok(EvalRecord {
                index: r.index,
                status: if matches!(r.prediction, PredictionRecord::Ok { .. }) { "ok" } else { "error" }.to_string(),
                precision: rep.precision,
                recall: rep.recall,
                f1: rep.f1,
                true_positives: rep.true_positives,
                predicted_points: rep.predicted_points,
                gt_points: rep.gt_points,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let agg = aggregate(&results, tol).map_err(metric_err)?;
    let sweep = tolerance_sweep(&results, tol, sweep).map_err(metric_err)?;

    let mut lines: Vec<serde_json::Value> = per_image.iter().map(|r| serde_json::to_value(r).expect("plain struct")).collect();
    lines.push(serde_json::json!({ "aggregate": agg, "tolerance": tol }));
    write_jsonl(&root.join("eval.jsonl"), &lines)?;
    if !sweep.is_empty() {
        let mut csv = String::from("tolerance,f1\n");
        for (m, f) in &sweep {
            csv.push_str(&format!("{m},{f:.4}\n"));
        }
        write_atomic(&root.join("sweep.csv"), csv.as_bytes())?;
    }
    Ok(EvalReport { tolerance: *tol, per_image, aggregate: agg, sweep })
}

/// Human-readable table of an evaluation report.
pub fn format_table(report: &EvalReport) -> String {
    let mut s = format!("{:>7} {:>6} {:>9} {:>9} {:>9}\n", "image", "status", "precision", "recall", "f1");
    for r in &report.per_image {
        s.push_str(&format!("{:>7} {:>6} {:>9.4} {:>9.4} {:>9.2}\n", r.index, r.status, r.precision, r.recall, r.f1));
    }
    let a = &report.aggregate;
    s.push_str(&format!(
        "{:>7} {:>6} {:>9.4} {:>9.4} {:>9.2}   (micro; macro f1 {:.2}, {} failed of {})\n",
        "all", "", a.precision, a.recall, a.f1, a.macro_f1, a.failures, a.images
    ));
    for (m, f) in &report.sweep {
        s.push_str(&format!("sweep tolerance {m}: f1 {f:.2}\n"));
    }
    s
}

// ---------------------------------------------------------------------------
// Overlays

const BOX_LABEL: Rgb = [30, 90, 220];
const BOX_MARK: Rgb = [230, 120, 20];
const CORNER: Rgb = [220, 20, 60];
const CANON_GRID: Rgb = [120, 200, 120];
const REPROJECTED: Rgb = [0, 160, 60];
const BANNER: Rgb = [200, 0, 0];

fn draw_box(img: &mut RasterImage, b: &crate::geometry::PixelBox, c: Rgb) {
    let k = b.corners();
    img.draw_polyline(&[k[0], k[1], k[2], k[3], k[0]], 1.0, c);
}

/// Debug rendering: detection boxes, resolved corners, the canonical grid
/// mapped back to the image, and extracted points reprojected onto it.
/// Failed extractions get a red banner across the top.
pub fn render_overlay(image: &RasterImage, dets: Option<&DetectionSet>, pred: &PredictionRecord) -> RasterImage {
    let mut img = image.clone();
    if let Some(d) = dets {
        for det in &d.detections {
            draw_box(&mut img, &det.bbox, if det.class == DetectionClass::TickLabel { BOX_LABEL } else { BOX_MARK });
        }
        if let CornerEvidence::Keypoints(k) = &d.corners {
            for p in k {
                img.fill_circle(*p, 3.0, CORNER);
            }
        }
    }
    match pred {
        PredictionRecord::Ok { extraction, .. } => {
            if let Ok(inv) = geometry::invert(&extraction.homography) {
                for k in 0..=10 {
                    let t = k as f64 / 10.0;
                    let seg = |a: Point2, b: Point2| (geometry::apply(&inv, a).ok(), geometry::apply(&inv, b).ok());
                    for (a, b) in [seg(Point2::new(t, 0.0), Point2::new(t, 1.0)), seg(Point2::new(0.0, t), Point2::new(1.0, t))] {
                        if let (Some(a), Some(b)) = (a, b) {
                            img.draw_segment(a, b, 1.0, CANON_GRID);
                        }
                    }
                }
            }
            let c = extraction.corners;
            img.draw_polyline(&[c[0], c[1], c[2], c[3], c[0]], 2.0, CORNER);
            for line in &extraction.series.lines {
                for &(x, y) in line {
                    if let Some(p) = extraction.reproject(x, y) {
                        img.draw_segment(Point2::new(p.x - 5.0, p.y - 5.0), Point2::new(p.x + 5.0, p.y + 5.0), 2.0, REPROJECTED);
                        img.draw_segment(Point2::new(p.x - 5.0, p.y + 5.0), Point2::new(p.x + 5.0, p.y - 5.0), 2.0, REPROJECTED);
                    }
                }
            }
        }
        PredictionRecord::Error { .. } => {
            let w = img.width as f64;
            img.fill_polygon(&[Point2::new(0.0, 0.0), Point2::new(0.0, 24.0), Point2::new(w, 24.0), Point2::new(w, 0.0)], BANNER);
        }
    }
    img
}

/// Writes `overlays/NNNNN.png` for every manifest entry.
pub fn overlay_dataset(root: &Path) -> Result<usize, PipelineError> {
    let (_, entries) = read_manifest(root)?;
    entries
        .par_iter()
        .map(|e| {
            let pred_path = root.join("predictions").join(name(e.index, "json"));
            if !pred_path.exists() {
                return Err(PipelineError::Missing(format!("prediction for image {}", e.index)));
            }
            let pred: PredictionRecord = read_json(&pred_path)?;
            let det_path = root.join("detections").join(name(e.index, "json"));
            let dets: Option<DetectionSet> = if det_path.exists() { Some(read_json(&det_path)?) } else { None };
            let img_path = root.join(&e.image);
            let image = RasterImage::load_png(&img_path).map_err(|err| fmt_err(&img_path, err))?;
            write_png(&root.join("overlays").join(name(e.index, "png")), &render_overlay(&image, dets.as_ref(), &pred))?;
            Ok(())
        })
        .collect::<Result<Vec<()>, _>>()
        .map(|v| v.len())
}

// ---------------------------------------------------------------------------
// Ablation

/// Cumulative augmentation ladder: each rung adds stages to the previous.
pub fn ablation_ladder() -> Vec<(&'static str, Option<AugmentConfig>)> {
    let none = AugmentConfig::none();
    let persp = AugmentConfig { perspective: true, ..none.clone() };
    let color = AugmentConfig { color: true, ..persp.clone() };
    let blur_noise = AugmentConfig { blur: true, noise: true, ..color.clone() };
    let tps = AugmentConfig { tps: true, ..blur_noise.clone() };
    vec![("baseline", None), ("+perspective", Some(persp)), ("+color", Some(color)), ("+blur_noise", Some(blur_noise)), ("+tps", Some(tps))]
}

/// Detector noise grid swept at every ladder rung.
pub fn ablation_noise_grid() -> Vec<(&'static str, NoiseModel)> {
    vec![
        ("none", NoiseModel::default()),
        ("box_jitter_2px", NoiseModel { box_jitter_sigma: 2.0, ..NoiseModel::default() }),
        ("reference", NoiseModel::reference()),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub stage: String,
    pub noise: String,
    pub images: usize,
    pub failures: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn run_ablation(
    master_seed: u64,
    count: u64,
    profile: DomainProfile,
    mode: CornerMode,
    tol: &Tolerance,
) -> Result<Vec<AblationRow>, PipelineError> {
    let mut rows = Vec::new();
    for (stage, aug) in ablation_ladder() {
        for (noise_name, noise) in ablation_noise_grid() {
            let detector = if noise.is_zero() { Detector::Oracle } else { Detector::Noisy { noise } };
            let cfg = BatchConfig { master_seed, count, profile, augment: aug.clone(), detector, corner_mode: mode };
            let results = run_batch(&cfg)?;
            let a = aggregate(&results, tol).map_err(|e| PipelineError::Format { path: PathBuf::new(), message: e.to_string() })?;
            rows.push(AblationRow {
                stage: stage.to_string(),
                noise: noise_name.to_string(),
                images: a.images,
                failures: a.failures,
                precision: a.precision,
                recall: a.recall,
                f1: a.f1,
            });
        }
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("stage,noise,images,failures,precision,recall,f1\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{:.4},{:.4},{:.2}\n", r.stage, r.noise, r.images, r.failures, r.precision, r.recall, r.f1));
    }
    s
}

/// Corner recovery error of mask evidence, for diagnostics.
pub fn mask_corner_error(gt: &GroundTruth) -> Result<f64, quadfit::QuadError> {
    let mask = quadfit::BinaryMask::from_polygon(gt.width, gt.height, &gt.corners);
    let got = quadfit::mask_to_quad(&mask, (gt.width, gt.height))?;
    Ok(got.iter().zip(&gt.corners).map(|(a, b)| a.distance(*b)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerBenchmark {
    pub warps: usize,
    /// Warps for which no quadrilateral was recovered.
    pub failures: usize,
    pub mean_error: f64,
    pub max_error: f64,
}

/// Mask-path corner accuracy under random perspective warps: a chart-sized
/// axes rectangle is warped by a homography whose frame corners move inward
/// by up to a quarter of each dimension, rasterized at 720×720 and recovered
/// with [`quadfit::mask_to_quad`]. Errors are per corner, in pixels.
pub fn corner_benchmark(warps: usize, seed: u64) -> CornerBenchmark {
    use rand::Rng;
    let mut rng = seeds::rng(seed);
    let size = synthgen::IMAGE_SIZE;
    let m = (size - 1) as f64;
    let rect = [Point2::new(90.0, 160.0), Point2::new(90.0, 560.0), Point2::new(690.0, 560.0), Point2::new(690.0, 160.0)];
    let frame = [Point2::new(0.0, 0.0), Point2::new(0.0, m), Point2::new(m, m), Point2::new(m, 0.0)];
    let (mut sum, mut max, mut count, mut failures) = (0.0f64, 0.0f64, 0usize, 0usize);
    for _ in 0..warps {
        let mut off = || Point2::new(rng.random_range(0.0..=0.25 * m), rng.random_range(0.0..=0.25 * m));
        let (a, b, c, d) = (off(), off(), off(), off());
        let dst = [Point2::new(a.x, a.y), Point2::new(b.x, m - b.y), Point2::new(m - c.x, m - c.y), Point2::new(m - d.x, d.y)];
        let Ok(h) = geometry::solve_from_corners(&frame, &dst) else {
            failures += 1;
            continue;
        };
        let warped = rect.map(|p| geometry::apply(&h, p).unwrap_or(p));
        let mask = quadfit::BinaryMask::from_polygon(size, size, &warped);
        match quadfit::mask_to_quad(&mask, (size, size)) {
            Ok(got) => {
                for (g, t) in got.iter().zip(&warped) {
                    let e = g.distance(*t);
                    sum += e;
                    max = max.max(e);
                    count += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    CornerBenchmark { warps, failures, mean_error: if count == 0 { f64::INFINITY } else { sum / count as f64 }, max_error: max }
}
