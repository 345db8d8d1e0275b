use chartrec::grouping::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scalar reference: per ordered pair, BCE of the logistic probability.
pub fn loss_oracle(emb: &[Vec<f64>], lines: &[usize], images: &[usize], tau: f64, bias: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..emb.len() {
        for j in 0..emb.len() {
            if i == j || images[i] != images[j] {
                continue;
            }
            let dot: f64 = emb[i].iter().zip(&emb[j]).map(|(a, b)| a * b).sum();
            let ni = emb[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            let nj = emb[j].iter().map(|a| a * a).sum::<f64>().sqrt();
            let z = dot / (ni * nj) / tau + bias;
            let p = 1.0 / (1.0 + (-z).exp());
            total -= if lines[i] == lines[j] { p.ln() } else { (1.0 - p).ln() };
        }
    }
    total
}

fn instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<usize>, GroupingParams) {
    let emb = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let lines = (0..n).map(|_| rng.random_range(0..3)).collect();
    let params = GroupingParams { temperature: rng.random_range(0.3..1.5), bias: rng.random_range(-1.0..1.0) };
    (emb, lines, params)
}

#[test]
fn loss_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 2..=8 {
        for _ in 0..20 {
            let (emb, lines, params) = instance(&mut rng, n, 5);
            let images: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let got = grouping_loss(&emb, &PairLabels::from_batch(&lines, &images), &params).unwrap();
            let want = loss_oracle(&emb, &lines, &images, params.temperature, params.bias);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    for _ in 0..20 {
        let (emb, lines, params) = instance(&mut rng, 6, 8);
        let labels = PairLabels::from_line_ids(&lines);
        let g = grouping_loss_gradient(&emb, &labels, &params).unwrap();
        for i in 0..emb.len() {
            for k in 0..emb[i].len() {
                let mut plus = emb.clone();
                let mut minus = emb.clone();
                plus[i][k] += h;
                minus[i][k] -= h;
                let fd = (grouping_loss(&plus, &labels, &params).unwrap() - grouping_loss(&minus, &labels, &params).unwrap()) / (2.0 * h);
                assert!(rel_err(g.embeddings[i][k], fd) < 1e-4 || (g.embeddings[i][k] - fd).abs() < 1e-7);
            }
        }
        let f = |p: GroupingParams| grouping_loss(&emb, &labels, &p).unwrap();
        let fd_bias =
            (f(GroupingParams { bias: params.bias + h, ..params }) - f(GroupingParams { bias: params.bias - h, ..params })) / (2.0 * h);
        let fd_tau = (f(GroupingParams { temperature: params.temperature + h, ..params })
            - f(GroupingParams { temperature: params.temperature - h, ..params }))
            / (2.0 * h);
        assert!(rel_err(g.bias, fd_bias) < 1e-4);
        assert!(rel_err(g.temperature, fd_tau) < 1e-4);
    }
}

#[test]
fn bias_gradient_is_residual_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (emb, lines, params) = instance(&mut rng, 6, 4);
    let g = grouping_loss_gradient(&emb, &PairLabels::from_line_ids(&lines), &params).unwrap();
    let logits = similarity_logits(&emb, &params).unwrap();
    let mut sum = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            if let Some(z) = logits.get(i, j) {
                sum += pair_probability(z) - if lines[i] == lines[j] { 1.0 } else { 0.0 };
            }
        }
    }
    assert!((g.bias - sum).abs() < 1e-12);
}

#[test]
fn cross_image_pairs_contribute_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (emb, lines, params) = instance(&mut rng, 6, 4);
    let images = [0, 0, 0, 1, 1, 1];
    let both = grouping_loss(&emb, &PairLabels::from_batch(&lines, &images), &params).unwrap();
    let a = grouping_loss(&emb[..3], &PairLabels::from_line_ids(&lines[..3]), &params).unwrap();
    let b = grouping_loss(&emb[3..], &PairLabels::from_line_ids(&lines[3..]), &params).unwrap();
    assert!((both - (a + b)).abs() < 1e-12);
    let g = grouping_loss_gradient(&emb, &PairLabels::from_batch(&lines, &images), &params).unwrap();
    let ga = grouping_loss_gradient(&emb[..3], &PairLabels::from_line_ids(&lines[..3]), &params).unwrap();
    for i in 0..3 {
        for k in 0..4 {
            assert!((g.embeddings[i][k] - ga.embeddings[i][k]).abs() < 1e-12);
        }
    }
}

#[test]
fn scaling_embeddings_leaves_logits_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut emb, _, params) = instance(&mut rng, 5, 6);
    let before = similarity_logits(&emb, &params).unwrap();
    emb[2].iter_mut().for_each(|v| *v *= 7.5);
    let after = similarity_logits(&emb, &params).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            assert!((before.get(i, j).unwrap_or(0.0) - after.get(i, j).unwrap_or(0.0)).abs() < 1e-12);
        }
    }
}

/// Unit vector at angle `theta` from `base`, tilted towards a random
/// direction orthogonal to it.
fn perturb(rng: &mut ChaCha8Rng, base: &[f64], theta: f64) -> Vec<f64> {
    let mut dir: Vec<f64> = base.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    let along: f64 = dir.iter().zip(base).map(|(a, b)| a * b).sum();
    dir.iter_mut().zip(base).for_each(|(d, b)| *d -= along * b);
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    base.iter().zip(&dir).map(|(b, d)| b * theta.cos() + d / norm * theta.sin()).collect()
}

#[test]
fn noisy_three_line_partition_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // Three coplanar unit vectors 120° apart; the noise cannot close the gap.
    let bases: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 3.0;
            let mut v = vec![0.0; 8];
            v[0] = a.cos();
            v[1] = a.sin();
            v
        })
        .collect();
    for _ in 0..50 {
        let mut emb = Vec::new();
        let mut truth = Vec::new();
        for (line, base) in bases.iter().enumerate() {
            for _ in 0..3 {
                let theta = rng.random_range(0.0..=10f64.to_radians());
                emb.push(perturb(&mut rng, base, theta));
                truth.push(line);
            }
        }
        let mut order: Vec<usize> = (0..9).collect();
        for i in (1..9).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| emb[i].clone()).collect();
        let clusters = cluster_marks(&shuffled, &GroupingParams::default(), DEFAULT_PROB_THRESHOLD).unwrap();
        // Rand index 1: every pair is together exactly when it shares a line.
        let mut label = [0; 9];
        for (c, members) in clusters.iter().enumerate() {
            members.iter().for_each(|&k| label[k] = c);
        }
        for a in 0..9 {
            for b in 0..9 {
                assert_eq!(label[a] == label[b], truth[order[a]] == truth[order[b]]);
            }
        }
    }
}

#[test]
fn cluster_assignment_ignores_input_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let emb: Vec<Vec<f64>> = (0..7).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let params = GroupingParams::default();
        let canon = |clusters: Vec<Vec<usize>>, map: &dyn Fn(usize) -> usize| {
            let mut sets: Vec<Vec<usize>> = clusters
                .into_iter()
                .map(|c| {
                    let mut c: Vec<usize> = c.into_iter().map(map).collect();
                    c.sort_unstable();
                    c
                })
                .collect();
            sets.sort();
            sets
        };
        let base = canon(cluster_marks(&emb, &params, 0.5).unwrap(), &|k| k);
        let perm: Vec<usize> = (0..7).rev().collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| emb[i].clone()).collect();
        let got = canon(cluster_marks(&permuted, &params, 0.5).unwrap(), &|k| perm[k]);
        assert_eq!(base, got);
    }
}

#[test]
fn single_mark_is_a_singleton() {
    assert_eq!(cluster_marks(&[vec![1.0, 0.0]], &GroupingParams::default(), 0.5).unwrap(), vec![vec![0]]);
}
