//! Recovery of data series from detections.
//!
//! Detections are remapped into the canonical chart frame, tick labels are
//! split into x and y axes by their proximity to the chart borders, each axis
//! gets a consensus linear (or log-linear) model from label position to
//! value, and mark centers are pushed through both models.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{CornerEvidence, Detection, DetectionClass};
use crate::geometry::{self, GeometryError, Homography, Point2};
use crate::grouping::{self, GroupingError, GroupingParams};
use crate::quadfit::{self, QuadError};

/// Labels whose canonical coordinate is within this distance of a border
/// belong to that border's axis.
pub const BORDER_BAND: f64 = 0.15;
/// Labels mapping outside this canonical range along their axis are ignored.
pub const CANONICAL_RANGE: (f64, f64) = (-0.3, 1.3);
/// Inlier threshold as a fraction of the median gap between label values.
pub const INLIER_GAP_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrateError {
    #[error("cannot parse tick text {0:?}")]
    UnparseableText(String),
    #[error("need at least 2 usable labels with distinct positions, have {0}")]
    InsufficientLabels(usize),
    #[error("no axis model reaches consensus")]
    NoConsensus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Corners,
    Homography,
    XAxis,
    YAxis,
    Grouping,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Corners => "corners",
            Stage::Homography => "homography",
            Stage::XAxis => "x_axis",
            Stage::YAxis => "y_axis",
            Stage::Grouping => "grouping",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StageError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error("marks carry neither series ids nor embeddings")]
    UngroupableMarks,
}

/// Extraction failure tagged with the pipeline stage that raised it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage}: {source}")]
pub struct ExtractError {
    pub stage: Stage,
    pub source: StageError,
}

impl ExtractError {
    fn at(stage: Stage) -> impl FnOnce(StageError) -> ExtractError {
        move |source| ExtractError { stage, source }
    }

    /// Short variant name of the underlying error, e.g. `InsufficientLabels`.
    pub fn kind(&self) -> String {
        let dbg = format!("{:?}", self.source);
        // "Calibrate(InsufficientLabels(0))" -> "InsufficientLabels"
        let inner = dbg.split_once('(').map_or(dbg.as_str(), |(_, rest)| rest);
        inner.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
    }
}

/// Parses a tick label: optional sign, decimals, thousands separators,
/// a trailing `%` (÷100) or `k`/`K` (×1000).
///
/// Scaling is done on the decimal string so the result is the float nearest
/// to the written value, e.g. `"1.5k"` parses to exactly the same `f64` as
/// `"1500"`.
pub fn parse_tick_text(text: &str) -> Result<f64, CalibrateError> {
    let err = || CalibrateError::UnparseableText(text.to_string());
    let cleaned: String = text.trim().chars().filter(|&c| c != ',').collect();
    let (body, shift) = if let Some(b) = cleaned.strip_suffix('%') {
        (b, -2)
    } else if let Some(b) = cleaned.strip_suffix(['k', 'K']) {
        (b, 3)
    } else {
        (cleaned.as_str(), 0)
    };
    let body = body.trim_end();
    let (sign, digits) = match body.as_bytes().first() {
        Some(b'-') => ("-", &body[1..]),
        Some(b'+') => ("", &body[1..]),
        _ => ("", body),
    };
    let literal = crate::decimal::shift_point(digits, shift).ok_or_else(err)?;
    let v: f64 = format!("{sign}{literal}").parse().map_err(|_| err())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(err())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsedLabel {
    /// Canonical x for x-axis labels, canonical y for y-axis labels.
    pub canonical_coord: f64,
    pub value: f64,
    pub detection_id: usize,
}

/// Splits tick-label detections into x- and y-axis candidates.
///
/// A label whose canonical y is within [`BORDER_BAND`] of the top or bottom
/// border is an x label; one whose canonical x is that close to the left or
/// right border is a y label. Labels matching both or neither, labels that
/// do not parse, and labels projecting outside [`CANONICAL_RANGE`] are dropped.
pub fn assign_axes(labels: &[Detection], h: &Homography) -> (Vec<ParsedLabel>, Vec<ParsedLabel>) {
    let near_border = |v: f64| v.abs().min((v - 1.0).abs()) <= BORDER_BAND;
    let in_range = |v: f64| (CANONICAL_RANGE.0..=CANONICAL_RANGE.1).contains(&v);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for det in labels.iter().filter(|d| d.class == DetectionClass::TickLabel) {
        let Ok(c) = geometry::apply(h, det.bbox.center()) else { continue };
        let Some(Ok(value)) = det.text.as_deref().map(parse_tick_text) else { continue };
        match (near_border(c.y), near_border(c.x)) {
            (true, false) if in_range(c.x) => xs.push(ParsedLabel { canonical_coord: c.x, value, detection_id: det.id }),
            (false, true) if in_range(c.y) => ys.push(ParsedLabel { canonical_coord: c.y, value, detection_id: det.id }),
            _ => {}
        }
    }
    (xs, ys)
}

/// Map from canonical coordinate to data value along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisModel {
    pub scale: f64,
    pub offset: f64,
    pub log_scale: bool,
    pub inlier_ids: Vec<usize>,
    /// Labels that entered the fit (after parsing and log-domain filtering).
    pub num_candidates: usize,
}

impl AxisModel {
    pub fn value(&self, coord: f64) -> f64 {
        let lin = self.scale * coord + self.offset;
        if self.log_scale {
            10f64.powf(lin)
        } else {
            lin
        }
    }

    /// Inverse of [`AxisModel::value`]; `None` for non-positive values on a
    /// log axis.
    pub fn coord(&self, value: f64) -> Option<f64> {
        let lin = if self.log_scale { (value > 0.0).then(|| value.log10())? } else { value };
        Some((lin - self.offset) / self.scale)
    }

    pub fn inlier_fraction(&self) -> f64 {
        if self.num_candidates == 0 {
            0.0
        } else {
            self.inlier_ids.len() as f64 / self.num_candidates as f64
        }
    }
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// Exhaustive minimal-set consensus fit of `value = a·coord + b`
/// (against `log10(value)` when `log_scale`).
///
/// Every label pair with distinct coordinates and values proposes a line;
/// labels within [`INLIER_GAP_FRACTION`] of the median value gap count as
/// inliers. The line with most inliers (smallest inlier residual on ties) is
/// refit by least squares on its inliers.
pub fn fit_axis(labels: &[ParsedLabel], log_scale: bool) -> Result<AxisModel, CalibrateError> {
    let pts: Vec<(f64, f64, usize)> = labels
        .iter()
        .filter(|l| l.canonical_coord.is_finite() && l.value.is_finite())
        .filter(|l| !log_scale || l.value > 0.0)
        .map(|l| (l.canonical_coord, if log_scale { l.value.log10() } else { l.value }, l.detection_id))
        .collect();
    let distinct_coords = {
        let mut c: Vec<f64> = pts.iter().map(|p| p.0).collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c.len()
    };
    if pts.len() < 2 || distinct_coords < 2 {
        return Err(CalibrateError::InsufficientLabels(pts.len()));
    }

    let mut values: Vec<f64> = pts.iter().map(|p| p.1).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut gaps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let threshold = INLIER_GAP_FRACTION * median(&mut gaps).ok_or(CalibrateError::NoConsensus)?;

    let mut best: Option<(Vec<usize>, f64)> = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (ci, vi, _) = pts[i];
            let (cj, vj, _) = pts[j];
            if ci == cj || vi == vj {
                continue;
            }
            let a = (vj - vi) / (cj - ci);
            let b = vi - a * ci;
            let mut inliers = Vec::new();
            let mut resid = 0.0;
            for (k, &(c, v, _)) in pts.iter().enumerate() {
                let r = (a * c + b - v).abs();
                if r <= threshold {
                    inliers.push(k);
                    resid += r;
                }
            }
            let better = match &best {
                None => true,
                Some((bi, br)) => inliers.len() > bi.len() || (inliers.len() == bi.len() && resid < *br),
            };
            if better {
                best = Some((inliers, resid));
            }
        }
    }
    let (inliers, _) = best.ok_or(CalibrateError::NoConsensus)?;
    if inliers.len() < 2 {
        return Err(CalibrateError::NoConsensus);
    }
    let fit_pts: Vec<(f64, f64)> = inliers.iter().map(|&k| (pts[k].0, pts[k].1)).collect();
    let (scale, offset) = least_squares(&fit_pts).ok_or(CalibrateError::NoConsensus)?;
    if scale == 0.0 || !scale.is_finite() || !offset.is_finite() {
        return Err(CalibrateError::NoConsensus);
    }
    Ok(AxisModel { scale, offset, log_scale, inlier_ids: inliers.iter().map(|&k| pts[k].2).collect(), num_candidates: pts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractParams {
    pub log_x: bool,
    pub log_y: bool,
    /// Image dimensions (width, height), needed to interpret mask evidence.
    pub image_dims: (usize, usize),
    /// Group marks by detector-provided series ids when every mark has one.
    pub prefer_series_ids: bool,
    pub grouping: GroupingParams,
    pub prob_threshold: f64,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            log_x: false,
            log_y: false,
            image_dims: (720, 720),
            prefer_series_ids: true,
            grouping: GroupingParams::default(),
            prob_threshold: grouping::DEFAULT_PROB_THRESHOLD,
        }
    }
}

/// Recovered lines in data units; points within a line ordered by x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesExtraction {
    pub lines: Vec<Vec<(f64, f64)>>,
    pub confidence: Vec<f64>,
}

/// Series plus the intermediate models, for reporting and overlays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub series: SeriesExtraction,
    pub corners: [Point2; 4],
    pub homography: Homography,
    pub x_axis: AxisModel,
    pub y_axis: AxisModel,
}

impl Extraction {
    /// Image position of a data point, inverting both axis models and the
    /// canonicalizing homography.
    pub fn reproject(&self, x: f64, y: f64) -> Option<Point2> {
        let c = Point2::new(self.x_axis.coord(x)?, self.y_axis.coord(y)?);
        let inv = geometry::invert(&self.homography).ok()?;
        geometry::apply(&inv, c).ok()
    }
}

pub fn resolve_corners(evidence: &CornerEvidence, dims: (usize, usize)) -> Result<[Point2; 4], QuadError> {
    match evidence {
        CornerEvidence::Keypoints(k) => Ok(*k),
        CornerEvidence::Mask(m) => quadfit::mask_to_quad(m, dims),
    }
}

fn group_marks(marks: &[&Detection], params: &ExtractParams) -> Result<Vec<Vec<usize>>, StageError> {
    if params.prefer_series_ids && marks.iter().all(|m| m.series_id.is_some()) {
        let mut by_id: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, m) in marks.iter().enumerate() {
            by_id.entry(m.series_id.unwrap_or_default()).or_default().push(k);
        }
        return Ok(by_id.into_values().collect());
    }
    let embeddings: Option<Vec<Vec<f64>>> = marks.iter().map(|m| m.embedding.clone()).collect();
    let embeddings = embeddings.ok_or(StageError::UngroupableMarks)?;
    Ok(grouping::cluster_marks(&embeddings, &params.grouping, params.prob_threshold)?)
}

/// Full post-processing chain from detections to data series.
pub fn extract_series(detections: &[Detection], evidence: &CornerEvidence, params: &ExtractParams) -> Result<Extraction, ExtractError> {
    let corners = resolve_corners(evidence, params.image_dims).map_err(|e| ExtractError::at(Stage::Corners)(e.into()))?;
    let h = geometry::canonicalize(&corners).map_err(|e| ExtractError::at(Stage::Homography)(e.into()))?;

    let (x_labels, y_labels) = assign_axes(detections, &h);
    let x_axis = fit_axis(&x_labels, params.log_x).map_err(|e| ExtractError::at(Stage::XAxis)(e.into()))?;
    let y_axis = fit_axis(&y_labels, params.log_y).map_err(|e| ExtractError::at(Stage::YAxis)(e.into()))?;

    let marks: Vec<&Detection> = detections.iter().filter(|d| d.class == DetectionClass::Mark).collect();
    let groups = group_marks(&marks, params).map_err(ExtractError::at(Stage::Grouping))?;

    let confidence = x_axis.inlier_fraction() * y_axis.inlier_fraction();
    let mut lines = Vec::with_capacity(groups.len());
    for group in groups {
        let mut pts: Vec<(f64, f64)> = group
            .iter()
            .filter_map(|&k| geometry::apply(&h, marks[k].bbox.center()).ok())
            .map(|c| (x_axis.value(c.x), y_axis.value(c.y)))
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        if !pts.is_empty() {
            lines.push(pts);
        }
    }
    let confidence = vec![confidence; lines.len()];
    Ok(Extraction { series: SeriesExtraction { lines, confidence }, corners, homography: h, x_axis, y_axis })
}
