use chartrec::detect::*;
use chartrec::quadfit::mask_to_quad;
use chartrec::synthgen::{render_chart, sample_spec, AxisKind, DomainProfile, GroundTruth};

fn gt(index: u64) -> GroundTruth {
    render_chart(&sample_spec(19, index, DomainProfile::General)).1
}

#[test]
fn oracle_emits_one_detection_per_annotation() {
    for index in 0..20 {
        let g = gt(index);
        let spec = sample_spec(19, index, DomainProfile::General);
        let d = oracle_detect(&g, CornerMode::Keypoint);
        let labels: Vec<&Detection> = d.detections.iter().filter(|d| d.class == DetectionClass::TickLabel).collect();
        let marks: Vec<&Detection> = d.detections.iter().filter(|d| d.class == DetectionClass::Mark).collect();
        assert_eq!(labels.len(), spec.num_ticks_x + spec.num_ticks_y);
        assert_eq!(marks.len(), spec.series.len() * spec.num_ticks_x);
        assert_eq!(g.label_annotations.iter().filter(|l| l.axis == AxisKind::X).count(), spec.num_ticks_x);
        assert!(labels.iter().all(|d| d.text.is_some() && d.embedding.is_none() && d.series_id.is_none()));
        assert!(marks.iter().all(|d| d.text.is_none() && d.embedding.is_some() && d.series_id.is_some()));
        assert!(d.detections.iter().enumerate().all(|(i, d)| d.id == i));
        assert_eq!(d.corners, CornerEvidence::Keypoints(g.corners));
    }
}

#[test]
fn mask_evidence_recovers_corners() {
    for index in 0..20 {
        let g = gt(index);
        let CornerEvidence::Mask(mask) = oracle_detect(&g, CornerMode::Mask).corners else { panic!("mask expected") };
        let q = mask_to_quad(&mask, (g.width, g.height)).unwrap();
        for (a, b) in q.iter().zip(&g.corners) {
            assert!(a.distance(*b) < 2.0, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn ocr_substitution_rate_matches_probability() {
    let mut g = gt(0);
    let base = g.label_annotations.clone();
    g.label_annotations = base.iter().cycle().take(10_000).cloned().collect();
    g.mark_annotations.clear();
    let noise = NoiseModel { ocr_char_sub_prob: 0.1, seed: 4, ..NoiseModel::default() };
    let noisy = noisy_detect(&g, &noise, CornerMode::Keypoint);
    assert_eq!(noisy.detections.len(), 10_000);
    let (mut changed, mut total) = (0usize, 0usize);
    for (d, l) in noisy.detections.iter().zip(&g.label_annotations) {
        let t = d.text.as_deref().unwrap();
        assert_eq!(t.chars().count(), l.text.chars().count());
        changed += t.chars().zip(l.text.chars()).filter(|(a, b)| a != b).count();
        total += l.text.chars().count();
    }
    let rate = changed as f64 / total as f64;
    assert!((0.09..=0.11).contains(&rate), "{rate}");
}

#[test]
fn noise_is_deterministic_per_seed() {
    let g = gt(1);
    let noise = NoiseModel { seed: 3, ..NoiseModel::reference() };
    assert_eq!(noisy_detect(&g, &noise, CornerMode::Mask), noisy_detect(&g, &noise, CornerMode::Mask));
    let other = NoiseModel { seed: 4, ..noise };
    assert_ne!(noisy_detect(&g, &noise, CornerMode::Keypoint), noisy_detect(&g, &other, CornerMode::Keypoint));
}

#[test]
fn spurious_and_dropped_detections_change_counts() {
    let g = gt(2);
    let n = oracle_detect(&g, CornerMode::Keypoint).detections.len();
    let all_fake = NoiseModel { spurious_prob: 1.0, seed: 1, ..NoiseModel::default() };
    let d = noisy_detect(&g, &all_fake, CornerMode::Keypoint);
    assert_eq!(d.detections.len(), 2 * n);
    assert!(d.detections.iter().all(|d| d.bbox.x0 >= 0.0 && d.bbox.x1 <= g.width as f64));
}

#[test]
fn detection_set_json_roundtrip() {
    let g = gt(3);
    for mode in [CornerMode::Keypoint, CornerMode::Mask] {
        let d = noisy_detect(&g, &NoiseModel { seed: 2, ..NoiseModel::reference() }, mode);
        let back: DetectionSet = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
