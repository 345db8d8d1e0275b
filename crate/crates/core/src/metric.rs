//! Tolerance-based precision / recall / F1 for recovered line series.
//!
//! Predicted lines are paired with ground-truth lines by the injective
//! assignment maximizing the total number of matched points. F1 is reported
//! on a 0–100 scale: `F1 = 200·P·R / (P + R)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Guards the relative-error denominator at zero ground truth.
pub const RELATIVE_EPS: f64 = 1e-9;
/// Exhaustive line assignment is factorial; generated charts have ≤ 3 lines.
pub const MAX_LINES: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("too many lines for exhaustive assignment ({0} > {MAX_LINES})")]
    TooManyLines(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKind {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub kind: ToleranceKind,
    pub magnitude: f64,
    /// Match x by nearest ground-truth tick instead of by tolerance.
    #[serde(default)]
    pub categorical_x: bool,
}

impl Tolerance {
    pub fn relative(magnitude: f64) -> Self {
        Self { kind: ToleranceKind::Relative, magnitude, categorical_x: false }
    }

    pub fn absolute(magnitude: f64) -> Self {
        Self { kind: ToleranceKind::Absolute, magnitude, categorical_x: false }
    }

    pub fn with_categorical_x(mut self) -> Self {
        self.categorical_x = true;
        self
    }

    /// Closed rule: exactly at the tolerance counts as a match.
    pub fn accepts(&self, predicted: f64, truth: f64) -> bool {
        let err = (predicted - truth).abs();
        match self.kind {
            ToleranceKind::Relative => err / truth.abs().max(RELATIVE_EPS) <= self.magnitude,
            ToleranceKind::Absolute => err <= self.magnitude,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::relative(0.05)
    }
}

fn categorical_bin(x: f64, ticks: &[f64]) -> Option<usize> {
    let dist = |t: f64| {
        if x > 0.0 && t > 0.0 {
            (x.ln() - t.ln()).abs()
        } else {
            (x - t).abs()
        }
    };
    (0..ticks.len()).min_by(|&a, &b| dist(ticks[a]).total_cmp(&dist(ticks[b])))
}

/// True positives between one predicted and one ground-truth line.
///
/// Predicted points are visited in x order; each claims the unmatched
/// ground-truth point nearest in x (then y) among those within tolerance in
/// both coordinates.
pub fn match_line(pred: &[(f64, f64)], gt: &[(f64, f64)], tol: &Tolerance) -> usize {
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[a].0.total_cmp(&pred[b].0).then(pred[a].1.total_cmp(&pred[b].1)));
    let gt_x: Vec<f64> = gt.iter().map(|p| p.0).collect();
    let mut used = vec![false; gt.len()];
    let mut tp = 0;
    for &i in &order {
        let (px, py) = pred[i];
        let bin = if tol.categorical_x { categorical_bin(px, &gt_x) } else { None };
        let mut best: Option<(usize, f64, f64)> = None;
        for (j, &(gx, gy)) in gt.iter().enumerate() {
            if used[j] {
                continue;
            }
            let x_ok = match bin {
                Some(b) => gt_x[b] == gx,
                None => tol.accepts(px, gx),
            };
            if !x_ok || !tol.accepts(py, gy) {
                continue;
            }
            let (dx, dy) = ((px - gx).abs(), (py - gy).abs());
            if best.is_none_or(|(_, bx, by)| dx < bx || (dx == bx && dy < by)) {
                best = Some((j, dx, dy));
            }
        }
        if let Some((j, _, _)) = best {
            used[j] = true;
            tp += 1;
        }
    }
    tp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `line_assignment[p]` is the ground-truth line matched to predicted line `p`.
    pub line_assignment: Vec<Option<usize>>,
    /// True positives per predicted line under the assignment.
    pub line_true_positives: Vec<usize>,
    pub true_positives: usize,
    pub predicted_points: usize,
    pub gt_points: usize,
}

/// `200·P·R/(P+R)`, defined as 0 when `P + R = 0`.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        200.0 * precision * recall / (precision + recall)
    }
}

/// Precision and recall from raw counts; empty denominators give 0.
pub fn precision_recall(tp: usize, predicted: usize, gt: usize) -> (f64, f64) {
    let ratio = |n: usize| if n == 0 { 0.0 } else { tp as f64 / n as f64 };
    (ratio(predicted), ratio(gt))
}

/// Best total-TP injective assignment, by dynamic programming over subsets
/// of ground-truth lines. Returns `(total, assignment)`.
fn best_assignment(tp: &[Vec<usize>], n_gt: usize) -> (usize, Vec<Option<usize>>) {
    let n_pred = tp.len();
    let full = 1usize << n_gt;
    // best[p][mask]: max TP using predicted lines p.. with gt lines in mask taken.
    let mut best = vec![vec![0usize; full]; n_pred + 1];
    for p in (0..n_pred).rev() {
        for mask in 0..full {
            let mut v = best[p + 1][mask];
            for g in 0..n_gt {
                if mask & (1 << g) == 0 {
                    v = v.max(tp[p][g] + best[p + 1][mask | (1 << g)]);
                }
            }
            best[p][mask] = v;
        }
    }
    let mut assignment = vec![None; n_pred];
    let mut mask = 0;
    for (p, slot) in assignment.iter_mut().enumerate() {
        let target = best[p][mask];
        if best[p + 1][mask] == target {
            continue;
        }
        for g in 0..n_gt {
            if mask & (1 << g) == 0 && tp[p][g] + best[p + 1][mask | (1 << g)] == target {
                *slot = Some(g);
                mask |= 1 << g;
                break;
            }
        }
    }
    (best[0][0], assignment)
}

pub fn evaluate(pred: &[Vec<(f64, f64)>], gt: &[Vec<(f64, f64)>], tol: &Tolerance) -> Result<MatchReport, MetricError> {
    for n in [pred.len(), gt.len()] {
        if n > MAX_LINES {
            return Err(MetricError::TooManyLines(n));
        }
    }
    let tp: Vec<Vec<usize>> = pred.iter().map(|p| gt.iter().map(|g| match_line(p, g, tol)).collect()).collect();
    let (total, assignment) = best_assignment(&tp, gt.len());
    let line_true_positives = assignment.iter().enumerate().map(|(p, a)| a.map_or(0, |g| tp[p][g])).collect();
    let predicted_points = pred.iter().map(Vec::len).sum();
    let gt_points = gt.iter().map(Vec::len).sum();
    let (precision, recall) = precision_recall(total, predicted_points, gt_points);
    Ok(MatchReport {
        precision,
        recall,
        f1: f1_score(precision, recall),
        line_assignment: assignment,
        line_true_positives,
        true_positives: total,
        predicted_points,
        gt_points,
    })
}

/// Summed counts over many images; F1 is micro-averaged from these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub predicted_points: usize,
    pub gt_points: usize,
}

impl MatchCounts {
    pub fn add_report(&mut self, r: &MatchReport) {
        self.true_positives += r.true_positives;
        self.predicted_points += r.predicted_points;
        self.gt_points += r.gt_points;
    }

    pub fn add_missing(&mut self, gt_points: usize) {
        self.gt_points += gt_points;
    }

    pub fn precision_recall(&self) -> (f64, f64) {
        precision_recall(self.true_positives, self.predicted_points, self.gt_points)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = self.precision_recall();
        f1_score(p, r)
    }
}
