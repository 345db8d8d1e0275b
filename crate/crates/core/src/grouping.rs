//! Pairwise same-line likelihood for mark embeddings, its training loss and
//! gradient, and threshold-based agglomerative clustering for inference.
//!
//! The logit for a pair is `cos(fᵢ, fⱼ) / τ + bias` and the probability that
//! both marks belong to one line is its logistic squashing. The loss is the
//! binary cross-entropy summed over ordered pairs `i ≠ j` taken from the
//! same image, so each unordered pair contributes twice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TEMPERATURE: f64 = 0.2;
pub const DEFAULT_PROB_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupingError {
    #[error("embedding {0} has zero or non-finite norm")]
    ZeroNormEmbedding(usize),
    #[error("label shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("embeddings have inconsistent dimensions")]
    DimensionMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingParams {
    pub temperature: f64,
    pub bias: f64,
}

impl Default for GroupingParams {
    fn default() -> Self {
        Self { temperature: DEFAULT_TEMPERATURE, bias: 0.0 }
    }
}

/// Ground-truth pair structure for a batch of marks.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLabels {
    /// `same_line[i][j]` is true when marks i and j lie on one line.
    pub same_line: Vec<Vec<bool>>,
    /// Image each mark was taken from; pairs across images are masked.
    pub image_ids: Vec<usize>,
}

impl PairLabels {
    /// Labels for a single image from per-mark line ids.
    pub fn from_line_ids(line_ids: &[usize]) -> Self {
        Self::from_batch(line_ids, &vec![0; line_ids.len()])
    }

    pub fn from_batch(line_ids: &[usize], image_ids: &[usize]) -> Self {
        let same_line = line_ids
            .iter()
            .zip(image_ids)
            .map(|(li, ii)| line_ids.iter().zip(image_ids).map(|(lj, ij)| li == lj && ii == ij).collect())
            .collect();
        Self { same_line, image_ids: image_ids.to_vec() }
    }

    fn check(&self, n: usize) -> Result<(), GroupingError> {
        if self.image_ids.len() != n || self.same_line.len() != n || self.same_line.iter().any(|r| r.len() != n) {
            return Err(GroupingError::ShapeMismatch(format!("labels do not describe {n} marks")));
        }
        Ok(())
    }

    fn active(&self, i: usize, j: usize) -> bool {
        i != j && self.image_ids[i] == self.image_ids[j]
    }
}

/// Square matrix of pair logits; diagonal entries are masked.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    n: usize,
    values: Vec<f64>,
}

impl LogitMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `None` on the masked diagonal.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (i != j).then(|| self.values[i * self.n + j])
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        i == j
    }
}

fn norms(embeddings: &[Vec<f64>]) -> Result<Vec<f64>, GroupingError> {
    let dim = embeddings.first().map_or(0, Vec::len);
    embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if e.len() != dim {
                return Err(GroupingError::DimensionMismatch);
            }
            let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 && n.is_finite() {
                Ok(n)
            } else {
                Err(GroupingError::ZeroNormEmbedding(i))
            }
        })
        .collect()
}

fn cosine_matrix(embeddings: &[Vec<f64>], norms: &[f64]) -> Vec<f64> {
    let n = embeddings.len();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = embeddings[i].iter().zip(&embeddings[j]).map(|(a, b)| a * b).sum();
            let v = dot / (norms[i] * norms[j]);
            c[i * n + j] = v;
            c[j * n + i] = v;
        }
    }
    c
}

pub fn similarity_logits(embeddings: &[Vec<f64>], params: &GroupingParams) -> Result<LogitMatrix, GroupingError> {
    let nrm = norms(embeddings)?;
    let cos = cosine_matrix(embeddings, &nrm);
    let values = cos.into_iter().map(|c| c / params.temperature + params.bias).collect();
    Ok(LogitMatrix { n: embeddings.len(), values })
}

pub fn pair_probability(logit: f64) -> f64 {
    if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Binary cross-entropy of one pair written on the logit scale:
/// `−[g·ln σ(z) + (1−g)·ln(1−σ(z))] = softplus(z) − g·z`.
fn pair_bce(z: f64, same: bool) -> f64 {
    softplus(z) - if same { z } else { 0.0 }
}

pub fn grouping_loss(embeddings: &[Vec<f64>], labels: &PairLabels, params: &GroupingParams) -> Result<f64, GroupingError> {
    labels.check(embeddings.len())?;
    let logits = similarity_logits(embeddings, params)?;
    let n = embeddings.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels.active(i, j) {
                total += pair_bce(logits.values[i * n + j], labels.same_line[i][j]);
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub embeddings: Vec<Vec<f64>>,
    pub temperature: f64,
    pub bias: f64,
}

/// Analytic gradient of [`grouping_loss`].
///
/// With `gᵢⱼ = σ(zᵢⱼ) − Gᵢⱼ` on active ordered pairs:
/// `∂L/∂bias = Σ gᵢⱼ`, `∂L/∂τ = −Σ gᵢⱼ·cᵢⱼ/τ²`, and
/// `∂L/∂fᵢ = Σⱼ (gᵢⱼ + gⱼᵢ)/τ · (f̂ⱼ − cᵢⱼ f̂ᵢ)/‖fᵢ‖`.
pub fn grouping_loss_gradient(
    embeddings: &[Vec<f64>],
    labels: &PairLabels,
    params: &GroupingParams,
) -> Result<LossGradient, GroupingError> {
    labels.check(embeddings.len())?;
    let nrm = norms(embeddings)?;
    let cos = cosine_matrix(embeddings, &nrm);
    let n = embeddings.len();
    let tau = params.temperature;
    let dim = embeddings.first().map_or(0, Vec::len);

    let mut g = vec![0.0; n * n];
    let (mut d_bias, mut d_tau) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if labels.active(i, j) {
                let c = cos[i * n + j];
                let r = pair_probability(c / tau + params.bias) - if labels.same_line[i][j] { 1.0 } else { 0.0 };
                g[i * n + j] = r;
                d_bias += r;
                d_tau -= r * c / (tau * tau);
            }
        }
    }

    let mut d_emb = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for j in 0..n {
            let w = (g[i * n + j] + g[j * n + i]) / tau;
            if i == j || w == 0.0 {
                continue;
            }
            let c = cos[i * n + j];
            for k in 0..dim {
                let unit_j = embeddings[j][k] / nrm[j];
                let unit_i = embeddings[i][k] / nrm[i];
                d_emb[i][k] += w * (unit_j - c * unit_i) / nrm[i];
            }
        }
    }
    Ok(LossGradient { embeddings: d_emb, temperature: d_tau, bias: d_bias })
}

/// Average-linkage agglomerative clustering on pair probabilities.
///
/// Repeatedly merges the two clusters with the highest mean pairwise
/// probability while that mean exceeds `prob_threshold`. Clusters are
/// returned sorted by their smallest member, members ascending.
pub fn cluster_marks(embeddings: &[Vec<f64>], params: &GroupingParams, prob_threshold: f64) -> Result<Vec<Vec<usize>>, GroupingError> {
    let n = embeddings.len();
    let logits = similarity_logits(embeddings, params)?;
    let prob: Vec<f64> = logits.values.iter().map(|&z| pair_probability(z)).collect();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    // Sum of pair probabilities between clusters a and b.
    let mut link_sum: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { prob[i * n + j] }).collect()).collect();

    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let avg = link_sum[a][b] / (clusters[a].len() * clusters[b].len()) as f64;
                if best.is_none_or(|(_, _, v)| avg > v) {
                    best = Some((a, b, avg));
                }
            }
        }
        let Some((a, b, avg)) = best else { break };
        if avg <= prob_threshold {
            break;
        }
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        let row_b = link_sum.remove(b);
        for row in link_sum.iter_mut() {
            let vb = row.remove(b);
            row[a] += vb;
        }
        for (k, v) in row_b.iter().enumerate().filter(|&(k, _)| k != b) {
            let k = if k > b { k - 1 } else { k };
            if k != a {
                link_sum[a][k] += v;
            }
        }
        link_sum[a][a] = 0.0;
    }

    for c in clusters.iter_mut() {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    Ok(clusters)
}
