use chartrec::augment::AugmentConfig;
use chartrec::calibrate::*;
use chartrec::detect::{self, CornerMode, NoiseModel};
use chartrec::pipeline::{self, BatchConfig, Detector};
use chartrec::synthgen::{sample_spec, DomainProfile, TICK_PADDING};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fraction(k: usize, n: usize) -> f64 {
    TICK_PADDING + (1.0 - 2.0 * TICK_PADDING) * k as f64 / (n - 1) as f64
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

/// Every generator tick set with n ≤ 8 labels and every placement of up to
/// ⌊(n−2)/2⌋ gross misreads; the clean line must win.
///
/// Misreads sit at least 4 strides off, beyond what any line through two
/// clean labels can reach inside the index span. Substituting another tick's
/// value is not covered: it can land exactly on the inclusive band edge.
#[test]
fn consensus_survives_every_minority_corruption() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut cases = 0;
    for chart in 0..12 {
        let spec = sample_spec(77, chart, DomainProfile::General);
        for axis in [&spec.x_axis, &spec.y_axis] {
            for n in 2..=8 {
                let values = axis.tick_values(n, false);
                let coords: Vec<f64> = (0..n).map(|k| fraction(k, n)).collect();
                // Closed form through the two extreme ticks.
                let a = (values[n - 1] - values[0]) / (coords[n - 1] - coords[0]);
                let b = values[0] - a * coords[0];
                for k in 0..=(n - 2) / 2 {
                    for bad in subsets(n, k) {
                        let mut vals = values.clone();
                        for &i in &bad {
                            let off = axis.stride * rng.random_range(4.0..12.0);
                            vals[i] = values[i] + if rng.random_bool(0.5) { off } else { -off };
                        }
                        let labels: Vec<ParsedLabel> =
                            (0..n).map(|i| ParsedLabel { canonical_coord: coords[i], value: vals[i], detection_id: i }).collect();
                        let m = fit_axis(&labels, false).unwrap();
                        let scale = a.abs().max(b.abs());
                        assert!(close(m.scale, a, scale) && close(m.offset, b, scale), "{vals:?}: {m:?}");
                        assert!((0..n).filter(|i| !bad.contains(i)).all(|i| m.inlier_ids.contains(&i)));
                        cases += 1;
                    }
                }
            }
        }
    }
    assert!(cases > 1000);
}

#[test]
fn clean_progressions_fit_exactly_with_all_inliers() {
    for chart in 0..50 {
        for profile in [DomainProfile::General, DomainProfile::Audiogram] {
            let spec = sample_spec(5, chart, profile);
            for (axis, n, log) in [(&spec.x_axis, spec.num_ticks_x, spec.log_x), (&spec.y_axis, spec.num_ticks_y, false)] {
                let values = axis.tick_values(n, log);
                let labels: Vec<ParsedLabel> = values
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| ParsedLabel { canonical_coord: fraction(k, n), value: v, detection_id: k })
                    .collect();
                let m = fit_axis(&labels, log).unwrap();
                assert_eq!(m.inlier_ids.len(), n);
                for l in &labels {
                    let want = if log { l.value.log10() } else { l.value };
                    let got = m.scale * l.canonical_coord + m.offset;
                    assert!(close(got, want, want.abs()), "{got} vs {want}");
                }
            }
        }
    }
}

fn max_relative_error(pred: &[Vec<(f64, f64)>], truth: &[Vec<(f64, f64)>]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    let rel = |p: f64, t: f64| if t == 0.0 { p.abs() } else { (p - t).abs() / t.abs() };
    pred.iter()
        .zip(truth)
        .flat_map(|(p, t)| {
            assert_eq!(p.len(), t.len());
            p.iter().zip(t).map(|(a, b)| rel(a.0, b.0).max(rel(a.1, b.1)))
        })
        .fold(0.0, f64::max)
}

#[test]
fn oracle_chain_recovers_raw_series() {
    for index in 0..20 {
        let s = pipeline::generate_sample(3, index, DomainProfile::General, None);
        let dets = detect::oracle_detect(s.gt(), CornerMode::Keypoint);
        let ex = extract_series(&dets.detections, &dets.corners, &pipeline::extract_params_for(s.gt())).unwrap();
        // Zero-valued truths are compared in absolute terms.
        assert!(max_relative_error(&ex.series.lines, &s.gt().raw_series) < 1e-6);
    }
}

#[test]
fn perspective_chain_within_a_tenth_of_a_percent() {
    let cfg = AugmentConfig::perspective_only(0.5);
    for index in 0..20 {
        let s = pipeline::generate_sample(3, index, DomainProfile::General, Some(&cfg));
        let gt = s.gt();
        let dets = detect::oracle_detect(gt, CornerMode::Keypoint);
        let ex = extract_series(&dets.detections, &dets.corners, &pipeline::extract_params_for(gt)).unwrap();
        let y_range = s.spec.y_ticks().last().unwrap() - s.spec.y_ticks()[0];
        let x_range = s.spec.x_ticks().last().unwrap() - s.spec.x_ticks()[0];
        for (p, t) in ex.series.lines.iter().zip(&gt.raw_series) {
            for (a, b) in p.iter().zip(t) {
                let ok = |pv: f64, tv: f64, range: f64| (pv - tv).abs() <= 1e-3 * tv.abs().max(range.abs());
                assert!(ok(a.0, b.0, x_range) && ok(a.1, b.1, y_range), "{a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn keypoint_and_mask_paths_agree_within_half_a_percent_of_range() {
    let cfg = AugmentConfig::perspective_only(0.5);
    for index in 0..100 {
        let s = pipeline::generate_sample(9, index, DomainProfile::General, Some(&cfg));
        let gt = s.gt();
        let params = pipeline::extract_params_for(gt);
        let kp = detect::oracle_detect(gt, CornerMode::Keypoint);
        let mk = detect::oracle_detect(gt, CornerMode::Mask);
        let a = extract_series(&kp.detections, &kp.corners, &params).unwrap();
        let b = extract_series(&mk.detections, &mk.corners, &params).unwrap();
        let xt = s.spec.x_ticks();
        let yt = s.spec.y_ticks();
        // Data extent of the whole axes rectangle; ticks are inset by the padding.
        let x_range = (xt.last().unwrap() - xt[0]) / (1.0 - 2.0 * TICK_PADDING);
        let y_range = (yt.last().unwrap() - yt[0]) / (1.0 - 2.0 * TICK_PADDING);
        assert_eq!(a.series.lines.len(), b.series.lines.len());
        for (la, lb) in a.series.lines.iter().zip(&b.series.lines) {
            assert_eq!(la.len(), lb.len());
            for (p, q) in la.iter().zip(lb) {
                assert!((p.0 - q.0).abs() < 0.005 * x_range, "x {p:?} vs {q:?}");
                assert!((p.1 - q.1).abs() < 0.005 * y_range, "y {p:?} vs {q:?}");
            }
        }
    }
}

fn noisy_f1(noise: NoiseModel) -> f64 {
    let detector = if noise.is_zero() { Detector::Oracle } else { Detector::Noisy { noise } };
    let cfg = BatchConfig {
        master_seed: 31,
        count: 40,
        profile: DomainProfile::General,
        augment: None,
        detector,
        corner_mode: CornerMode::Keypoint,
    };
    let results = pipeline::run_batch(&cfg).unwrap();
    pipeline::aggregate(&results, &Default::default()).unwrap().f1
}

#[test]
fn f1_degrades_monotonically_per_noise_parameter() {
    let z = NoiseModel::default();
    let grids: Vec<(&str, Vec<NoiseModel>)> = vec![
        ("box", [0.0, 2.0, 5.0].iter().map(|&v| NoiseModel { box_jitter_sigma: v, ..z }).collect()),
        ("drop", [0.0, 0.05, 0.2].iter().map(|&v| NoiseModel { drop_prob: v, ..z }).collect()),
        ("spurious", [0.0, 0.05, 0.2].iter().map(|&v| NoiseModel { spurious_prob: v, ..z }).collect()),
        ("ocr", [0.0, 0.05, 0.2].iter().map(|&v| NoiseModel { ocr_char_sub_prob: v, ..z }).collect()),
        ("corner", [0.0, 2.0, 6.0].iter().map(|&v| NoiseModel { corner_jitter_sigma: v, ..z }).collect()),
        ("embedding", [0.0, 0.1, 0.5].iter().map(|&v| NoiseModel { embedding_noise_sigma: v, ..z }).collect()),
    ];
    for (name, grid) in grids {
        let f: Vec<f64> = grid.into_iter().map(noisy_f1).collect();
        assert!(f[0] >= f[1] && f[1] >= f[2], "{name}: {f:?}");
    }
}
