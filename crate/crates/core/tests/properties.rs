use std::collections::{BTreeMap, BTreeSet, HashMap};

use ovmot::annotation::{parse_annotations, serialize_annotations, AnnotationSet};
use ovmot::association::{run_tracker, AssociationMode, TrackResult, TrackerConfig};
use ovmot::detection::{parse_detection_file, serialize_detections};
use ovmot::ingest::normalize_occlusions;
use ovmot::stats::{dataset_summary, stats_report};
use ovmot::synth::{generate_scenario, MotionModel, SynthConfig};
use ovmot::teta::{compute_teta, gt_as_prediction};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(seed: u64, noisy: bool) -> SynthConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SynthConfig {
        n_tracks: rng.random_range(1..=8),
        n_frames: rng.random_range(2..=60),
        n_categories: rng.random_range(1..=4),
        motion: if rng.random_bool(0.5) { MotionModel::ConstantVelocity } else { MotionModel::Sinusoidal },
        box_noise_std: if noisy { 2.0 } else { 0.0 },
        embedding_noise_std: if noisy { 0.1 } else { 0.0 },
        detection_drop_rate: if noisy { 0.1 } else { 0.0 },
        clutter_rate: if noisy { 0.3 } else { 0.0 },
        seed,
        ..Default::default()
    }
}

/// Ground truth with some records removed and some boxes nulled, so
/// tracks have gaps and occlusions.
fn holey_set(seed: u64) -> AnnotationSet {
    let (mut gt, _) = generate_scenario(&scenario(seed, false)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    gt.annotations.retain(|_| rng.random_bool(0.8));
    for a in &mut gt.annotations {
        if rng.random_bool(0.1) {
            a.bbox = None;
        }
    }
    gt
}

fn tracked(seed: u64) -> (AnnotationSet, TrackResult) {
    let (gt, det) = generate_scenario(&scenario(seed, true)).unwrap();
    let pred = run_tracker(&det, &TrackerConfig::default()).unwrap();
    (gt, pred)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn annotation_round_trip(seed in any::<u64>()) {
        let gt = holey_set(seed);
        gt.validate().unwrap();
        prop_assert_eq!(parse_annotations(&serialize_annotations(&gt).unwrap()).unwrap(), gt);
    }

    #[test]
    fn detection_round_trip(seed in any::<u64>()) {
        let (_, det) = generate_scenario(&scenario(seed, true)).unwrap();
        let parsed = parse_detection_file(&serialize_detections([&det]).unwrap(), Some(16)).unwrap();
        prop_assert_eq!(parsed, vec![det]);
    }

    #[test]
    fn split_is_a_partition(seed in any::<u64>(), mask in any::<u8>()) {
        let gt = holey_set(seed);
        let base: BTreeSet<String> = gt
            .categories
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << (i % 8)) != 0)
            .map(|(_, c)| c.name.clone())
            .collect();
        let s = gt.with_split(&base).validate().unwrap();
        prop_assert_eq!(s.n_base + s.n_novel, s.n_categories);
        prop_assert_eq!(s.n_base, base.len());
    }

    #[test]
    fn scores_bounded_and_teta_is_mean(seed in any::<u64>()) {
        let (gt, pred) = tracked(seed);
        let r = compute_teta(&gt, &pred, &[0.5, 0.75]).unwrap();
        for (_, s) in r.splits() {
            for v in [s.teta, s.loca, s.assa, s.clsa] {
                prop_assert!((0.0..=100.0).contains(&v));
            }
            prop_assert!((s.teta - (s.loca + s.assa + s.clsa) / 3.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn teta_ignores_id_labels_and_record_order(seed in any::<u64>()) {
        let (gt, pred) = tracked(seed);
        let base = compute_teta(&gt, &pred, &[0.5]).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: BTreeSet<i64> = pred.records.iter().map(|r| r.track_id).collect();
        let mut shuffled: Vec<i64> = ids.iter().map(|i| i + 1000).collect();
        shuffled.shuffle(&mut rng);
        let relabel: HashMap<i64, i64> = ids.iter().copied().zip(shuffled).collect();
        let mut other = pred.clone();
        for r in &mut other.records {
            r.track_id = relabel[&r.track_id];
        }
        other.records.shuffle(&mut rng);
        let mut gt_shuffled = gt.clone();
        gt_shuffled.annotations.shuffle(&mut rng);
        prop_assert_eq!(compute_teta(&gt_shuffled, &other, &[0.5]).unwrap(), base);
    }

    #[test]
    fn tracker_output_hygiene(seed in any::<u64>()) {
        let (_, det) = generate_scenario(&scenario(seed, true)).unwrap();
        for mode in [AssociationMode::Fused, AssociationMode::AppearanceOnly, AssociationMode::MotionOnly] {
            let cfg = TrackerConfig { mode, memory_frames: 3, ..TrackerConfig::default() };
            let a = run_tracker(&det, &cfg).unwrap();
            prop_assert_eq!(&a, &run_tracker(&det, &cfg).unwrap());
            a.validate().unwrap();
            // Ids are issued in order of first appearance and never reused
            // once a track has been retired.
            let mut first: BTreeMap<i64, i64> = BTreeMap::new();
            for r in &a.records {
                first.entry(r.track_id).or_insert(r.frame_index);
            }
            let starts: Vec<i64> = first.values().copied().collect();
            prop_assert!(starts.windows(2).all(|w| w[0] <= w[1]), "{starts:?}");
            for r in &a.records {
                let gap_ok = a
                    .records
                    .iter()
                    .filter(|o| o.track_id == r.track_id && o.frame_index > r.frame_index)
                    .map(|o| o.frame_index)
                    .min()
                    .is_none_or(|next| next - r.frame_index <= i64::from(cfg.memory_frames) + 1);
                prop_assert!(gap_ok, "track {} resurfaced after retirement", r.track_id);
            }
        }
    }

    #[test]
    fn stats_partition_and_ignore_order(seed in any::<u64>()) {
        let gt = holey_set(seed);
        let report = stats_report(&gt);
        for h in [&report.object_size, &report.object_shape, &report.track_length] {
            let total: f64 = h.fractions.values().sum();
            if h.counts.values().sum::<usize>() > 0 {
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
        let mut shuffled = gt.clone();
        shuffled.annotations.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(stats_report(&shuffled), report.clone());

        let v = gt.validate().unwrap();
        let s = dataset_summary(&gt);
        prop_assert_eq!((s.n_videos, s.n_classes, s.n_tracks, s.n_boxes), (v.n_videos, v.n_categories, v.n_tracks, v.n_boxes));
    }

    #[test]
    fn normalization_preserves_boxes(seed in any::<u64>()) {
        let gt = holey_set(seed);
        let n = normalize_occlusions(&gt);
        n.validate().unwrap();
        prop_assert_eq!(&n.annotations[..gt.annotations.len()], &gt.annotations[..]);
        prop_assert!(n.annotations[gt.annotations.len()..].iter().all(|a| a.bbox.is_none()));
        prop_assert_eq!(normalize_occlusions(&n), n.clone());
        // Self-evaluation is unaffected by explicit occlusion records.
        let a = compute_teta(&gt, &gt_as_prediction(&gt), &[0.5]).unwrap();
        let b = compute_teta(&n, &gt_as_prediction(&n), &[0.5]).unwrap();
        prop_assert_eq!(a, b);
    }
}
