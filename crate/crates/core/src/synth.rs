//! Synthetic scenarios with known ground truth, and controlled corruption of
//! track results.
//!
//! Each track lives in its own cell of a grid laid over the image, so
//! ground-truth boxes of different tracks never overlap. Latent embeddings
//! are unit vectors kept at least `embedding_separation` apart.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, Category, GtAnnotation, Split, VideoMeta};
use crate::association::{TrackRecord, TrackResult};
use crate::detection::{Detection, DetectionFrame, DetectionSequence};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::teta::match_localization;

/// Smallest box side the generator will produce, in pixels.
const MIN_BOX_SIDE: f64 = 4.0;
const MAX_EMBEDDING_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    #[default]
    ConstantVelocity,
    Sinusoidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_tracks: usize,
    pub n_frames: usize,
    pub n_categories: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub motion: MotionModel,
    pub embedding_dim: usize,
    /// Minimum Euclidean distance between latent track embeddings.
    pub embedding_separation: f64,
    pub box_noise_std: f64,
    pub embedding_noise_std: f64,
    pub detection_drop_rate: f64,
    /// Per-frame probability of one clutter detection.
    pub clutter_rate: f64,
    pub seed: u64,
    pub video_id: i64,
    pub fps: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_tracks: 5,
            n_frames: 50,
            n_categories: 3,
            image_width: 1280,
            image_height: 720,
            motion: MotionModel::ConstantVelocity,
            embedding_dim: 16,
            embedding_separation: 0.5,
            box_noise_std: 0.0,
            embedding_noise_std: 0.0,
            detection_drop_rate: 0.0,
            clutter_rate: 0.0,
            seed: 0,
            video_id: 1,
            fps: 30.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in [0, 1)")))
            }
        };
        prob("detection_drop_rate", self.detection_drop_rate)?;
        prob("clutter_rate", self.clutter_rate)?;
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be finite and >= 0")))
            }
        };
        nonneg("box_noise_std", self.box_noise_std)?;
        nonneg("embedding_noise_std", self.embedding_noise_std)?;
        if !(self.embedding_separation > 0.0 && self.embedding_separation.is_finite()) {
            return Err(Error::Config("embedding_separation must be > 0".into()));
        }
        if self.n_frames == 0 || self.n_categories == 0 || self.embedding_dim == 0 {
            return Err(Error::Config(
                "n_frames, n_categories and embedding_dim must be >= 1".into(),
            ));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Config("image size must be >= 1 pixel".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config("fps must be > 0".into()));
        }
        Ok(())
    }
}

/// Position of one track at frame `t`, as the box's top-left corner.
#[derive(Debug, Clone)]
struct Trajectory {
    w: f64,
    h: f64,
    motion: MotionModel,
    // Constant velocity: start and per-frame step.
    // Sinusoidal: centre, amplitude, angular rate and phase per axis.
    a: [f64; 2],
    b: [f64; 2],
    omega: [f64; 2],
    phase: [f64; 2],
}

impl Trajectory {
    fn at(&self, t: usize) -> BBox {
        let t = t as f64;
        let (x, y) = match self.motion {
            MotionModel::ConstantVelocity => (self.a[0] + self.b[0] * t, self.a[1] + self.b[1] * t),
            MotionModel::Sinusoidal => (
                self.a[0] + self.b[0] * (self.omega[0] * t + self.phase[0]).sin(),
                self.a[1] + self.b[1] * (self.omega[1] * t + self.phase[1]).sin(),
            ),
        };
        BBox { x, y, w: self.w, h: self.h }
    }
}

fn grid_shape(n: usize, width: f64, height: f64) -> (usize, usize) {
    // Columns chosen so cells come out as close to square as possible.
    let mut best = (n.max(1), 1);
    let mut best_score = f64::INFINITY;
    for cols in 1..=n.max(1) {
        let rows = n.max(1).div_ceil(cols);
        let aspect = (width / cols as f64) / (height / rows as f64);
        let score = aspect.ln().abs() + 1e-3 * (cols * rows - n.max(1)) as f64;
        if score < best_score {
            best_score = score;
            best = (cols, rows);
        }
    }
    best
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn latent_embeddings(rng: &mut ChaCha8Rng, n: usize, dim: usize, separation: f64) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut draws = 0;
    while out.len() < n {
        draws += 1;
        if draws > MAX_EMBEDDING_DRAWS {
            return Err(Error::Infeasible(format!(
                "could not place {n} unit embeddings in {dim} dimensions at separation {separation}"
            )));
        }
        let v = random_unit(rng, dim);
        let far = out.iter().all(|u| {
            u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= separation
        });
        if far {
            out.push(v);
        }
    }
    Ok(out)
}

/// Builds a ground-truth scenario and the detections a noisy detector would
/// report for it. Deterministic per `cfg.seed`.
pub fn generate_scenario(cfg: &SynthConfig) -> Result<(AnnotationSet, DetectionSequence)> {
    cfg.validate()?;
    if cfg.embedding_separation > 2.0 {
        return Err(Error::Infeasible(format!(
            "embedding_separation {} exceeds the unit-sphere diameter",
            cfg.embedding_separation
        )));
    }
    let (width, height) = (cfg.image_width as f64, cfg.image_height as f64);
    let (cols, rows) = grid_shape(cfg.n_tracks, width, height);
    let (cell_w, cell_h) = (width / cols as f64, height / rows as f64);
    if cfg.n_tracks > 0 && (cell_w * 0.25 < MIN_BOX_SIDE || cell_h * 0.25 < MIN_BOX_SIDE) {
        return Err(Error::Infeasible(format!(
            "{} tracks do not fit a {}x{} image",
            cfg.n_tracks, cfg.image_width, cfg.image_height
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let latents = latent_embeddings(&mut rng, cfg.n_tracks, cfg.embedding_dim, cfg.embedding_separation)?;
    let n_frames = cfg.n_frames;
    let mut trajectories = Vec::with_capacity(cfg.n_tracks);
    let mut track_categories = Vec::with_capacity(cfg.n_tracks);
    for k in 0..cfg.n_tracks {
        let (cx0, cy0) = ((k % cols) as f64 * cell_w, (k / cols) as f64 * cell_h);
        let w = cell_w * rng.random_range(0.25..0.4);
        let h = cell_h * rng.random_range(0.25..0.4);
        let (span_x, span_y) = (cell_w - w, cell_h - h);
        let traj = match cfg.motion {
            MotionModel::ConstantVelocity => {
                let start = [cx0 + rng.random_range(0.0..span_x), cy0 + rng.random_range(0.0..span_y)];
                let end = [cx0 + rng.random_range(0.0..span_x), cy0 + rng.random_range(0.0..span_y)];
                let steps = (n_frames.max(2) - 1) as f64;
                Trajectory {
                    w,
                    h,
                    motion: cfg.motion,
                    a: start,
                    b: [(end[0] - start[0]) / steps, (end[1] - start[1]) / steps],
                    omega: [0.0; 2],
                    phase: [0.0; 2],
                }
            }
            MotionModel::Sinusoidal => {
                let period = [rng.random_range(20.0..60.0), rng.random_range(20.0..60.0)];
                Trajectory {
                    w,
                    h,
                    motion: cfg.motion,
                    a: [cx0 + span_x / 2.0, cy0 + span_y / 2.0],
                    b: [
                        rng.random_range(0.2..0.5) * span_x,
                        rng.random_range(0.2..0.5) * span_y,
                    ],
                    omega: [
                        std::f64::consts::TAU / period[0],
                        std::f64::consts::TAU / period[1],
                    ],
                    phase: [
                        rng.random_range(0.0..std::f64::consts::TAU),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    ],
                }
            }
        };
        trajectories.push(traj);
        track_categories.push(rng.random_range(1..=cfg.n_categories as i64));
    }

    let video = VideoMeta {
        id: cfg.video_id,
        name: format!("synth_{}", cfg.seed),
        width: cfg.image_width,
        height: cfg.image_height,
        frame_count: n_frames as u32,
        fps: cfg.fps,
        ann_fps: cfg.fps,
    };
    let categories = (1..=cfg.n_categories as i64)
        .map(|id| Category {
            id,
            name: format!("category_{id}"),
            split: if id % 2 == 1 { Split::Base } else { Split::Novel },
        })
        .collect();

    let box_noise = Normal::new(0.0, cfg.box_noise_std).expect("validated std");
    let emb_noise = Normal::new(0.0, cfg.embedding_noise_std).expect("validated std");
    let mut annotations = Vec::with_capacity(cfg.n_tracks * n_frames);
    let mut frames = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let mut detections = Vec::new();
        for (k, traj) in trajectories.iter().enumerate() {
            let gt_box = traj.at(t);
            let category_id = track_categories[k];
            annotations.push(GtAnnotation {
                video_id: cfg.video_id,
                frame_index: t as i64,
                track_id: k as i64 + 1,
                category_id,
                bbox: Some(gt_box),
            });
            if cfg.detection_drop_rate > 0.0 && rng.random_bool(cfg.detection_drop_rate) {
                continue;
            }
            let bbox = if cfg.box_noise_std > 0.0 {
                let mut n = || box_noise.sample(&mut rng);
                BBox {
                    x: gt_box.x + n(),
                    y: gt_box.y + n(),
                    w: (gt_box.w + n()).max(1.0),
                    h: (gt_box.h + n()).max(1.0),
                }
            } else {
                gt_box
            };
            let embedding = if cfg.embedding_noise_std > 0.0 {
                latents[k].iter().map(|v| v + emb_noise.sample(&mut rng)).collect()
            } else {
                latents[k].clone()
            };
            let class_scores = true_class_scores(category_id, cfg.n_categories);
            detections.push(Detection::new(bbox, 0.9, Some(class_scores), embedding));
        }
        if cfg.clutter_rate > 0.0 && rng.random_bool(cfg.clutter_rate) {
            detections.push(clutter(&mut rng, cfg));
        }
        frames.push(DetectionFrame { frame_index: t as i64, detections });
    }

    let set = AnnotationSet {
        videos: vec![video],
        categories,
        annotations,
    };
    Ok((set, DetectionSequence { video_id: cfg.video_id, frames }))
}

fn true_class_scores(category_id: i64, n_categories: usize) -> BTreeMap<i64, f64> {
    let rest = if n_categories > 1 { 0.1 / (n_categories - 1) as f64 } else { 0.0 };
    (1..=n_categories as i64)
        .map(|c| (c, if c == category_id { 0.9 } else { rest }))
        .collect()
}

fn clutter(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Detection {
    let (width, height) = (cfg.image_width as f64, cfg.image_height as f64);
    let w = (width * rng.random_range(0.02..0.2)).max(1.0);
    let h = (height * rng.random_range(0.02..0.2)).max(1.0);
    let bbox = BBox {
        x: rng.random_range(0.0..(width - w).max(1.0)),
        y: rng.random_range(0.0..(height - h).max(1.0)),
        w,
        h,
    };
    let class_scores = (1..=cfg.n_categories as i64)
        .map(|c| (c, rng.random_range(0.0..1.0)))
        .collect();
    let score = rng.random_range(0.3..0.9);
    let embedding = random_unit(rng, cfg.embedding_dim);
    Detection::new(bbox, score, Some(class_scores), embedding)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorSpec {
    /// Per-record probability that a track is cut there and continues
    /// under a fresh id.
    pub id_switch_rate: f64,
    pub class_flip_rate: f64,
    pub box_jitter_std: f64,
    pub deletion_rate: f64,
    pub seed: u64,
}

impl ErrorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("id_switch_rate", self.id_switch_rate),
            ("class_flip_rate", self.class_flip_rate),
            ("deletion_rate", self.deletion_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        if !(self.box_jitter_std.is_finite() && self.box_jitter_std >= 0.0) {
            return Err(Error::Config("box_jitter_std must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// How many corruptions of each kind actually landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InjectionCounts {
    pub id_switches: usize,
    pub class_flips: usize,
    pub jittered: usize,
    pub deleted: usize,
}

/// Corrupts a track result. See [`inject_errors_logged`].
pub fn inject_errors(tr: &TrackResult, spec: &ErrorSpec) -> TrackResult {
    inject_errors_logged(tr, spec).0
}

/// Applies id switches, class flips, box jitter and deletions, each drawn
/// from its own random stream so enabling one kind never changes where the
/// others land. Record order is preserved.
///
/// # Panics
/// If `spec` fails [`ErrorSpec::validate`].
pub fn inject_errors_logged(tr: &TrackResult, spec: &ErrorSpec) -> (TrackResult, InjectionCounts) {
    spec.validate().expect("invalid ErrorSpec");
    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
        r.set_stream(s);
        r
    };
    let mut records = tr.records.clone();
    let mut counts = InjectionCounts::default();

    if spec.id_switch_rate > 0.0 {
        let mut rng = stream(1);
        let mut next_id = records.iter().map(|r| r.track_id).max().unwrap_or(0) + 1;
        let mut tracks: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            tracks.entry((r.video_id, r.track_id)).or_default().push(i);
        }
        for (_, mut idx) in tracks {
            idx.sort_by_key(|&i| records[i].frame_index);
            let mut current = records[idx[0]].track_id;
            for &i in &idx[1..] {
                if rng.random_bool(spec.id_switch_rate) {
                    current = next_id;
                    next_id += 1;
                    counts.id_switches += 1;
                }
                records[i].track_id = current;
            }
        }
    }

    if spec.class_flip_rate > 0.0 {
        let mut rng = stream(2);
        let mut pool: BTreeSet<i64> = records.iter().map(|r| r.category_id).collect();
        if pool.len() == 1 {
            let only = *pool.iter().next().unwrap();
            pool.insert(only + 1);
        }
        let pool: Vec<i64> = pool.into_iter().collect();
        for r in &mut records {
            if rng.random_bool(spec.class_flip_rate) {
                let others: Vec<i64> = pool.iter().copied().filter(|&c| c != r.category_id).collect();
                r.category_id = others[rng.random_range(0..others.len())];
                counts.class_flips += 1;
            }
        }
    }

    if spec.box_jitter_std > 0.0 {
        let mut rng = stream(3);
        let noise = Normal::new(0.0, spec.box_jitter_std).expect("validated std");
        for r in &mut records {
            let mut n = || noise.sample(&mut rng);
            r.bbox = BBox {
                x: r.bbox.x + n(),
                y: r.bbox.y + n(),
                w: (r.bbox.w + n()).max(1.0),
                h: (r.bbox.h + n()).max(1.0),
            };
            counts.jittered += 1;
        }
    }

    if spec.deletion_rate > 0.0 {
        let mut rng = stream(4);
        let before = records.len();
        records.retain(|_| !rng.random_bool(spec.deletion_rate));
        counts.deleted = before - records.len();
    }

    (TrackResult { records }, counts)
}

/// Identity consistency of a prediction against ground truth, judged on
/// per-frame localization matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// Times a ground-truth track's matched prediction id changed.
    pub id_switches: usize,
    /// Prediction ids matched to more than one ground-truth track.
    pub merged_predictions: usize,
    /// Visible ground-truth boxes with no matched prediction.
    pub unmatched_gt: usize,
}

impl IdentityCheck {
    /// True when the prediction covers every visible box and its ids are a
    /// one-to-one relabeling of the ground-truth ids.
    pub fn is_relabeling(&self) -> bool {
        self.id_switches == 0 && self.merged_predictions == 0 && self.unmatched_gt == 0
    }
}

pub fn identity_check(gt: &AnnotationSet, pred: &TrackResult, loc_iou_thresh: f64) -> IdentityCheck {
    let mut gt_frames: BTreeMap<(i64, i64), Vec<&GtAnnotation>> = BTreeMap::new();
    for a in &gt.annotations {
        gt_frames.entry((a.video_id, a.frame_index)).or_default().push(a);
    }
    let mut pred_frames: HashMap<(i64, i64), Vec<&TrackRecord>> = HashMap::new();
    for r in &pred.records {
        pred_frames.entry((r.video_id, r.frame_index)).or_default().push(r);
    }

    let mut check = IdentityCheck::default();
    let mut last_pred: HashMap<(i64, i64), i64> = HashMap::new();
    let mut gt_of_pred: HashMap<(i64, i64), BTreeSet<i64>> = HashMap::new();
    for (key, gts) in &gt_frames {
        let preds = pred_frames.get(key).map(Vec::as_slice).unwrap_or(&[]);
        let m = match_localization(gts, preds, loc_iou_thresh);
        check.unmatched_gt += m.fnl();
        for lm in m.matches {
            let gt_key = (lm.video_id, lm.gt_track_id);
            if let Some(prev) = last_pred.insert(gt_key, lm.pred_track_id) {
                if prev != lm.pred_track_id {
                    check.id_switches += 1;
                }
            }
            gt_of_pred
                .entry((lm.video_id, lm.pred_track_id))
                .or_default()
                .insert(lm.gt_track_id);
        }
    }
    check.merged_predictions = gt_of_pred.values().filter(|s| s.len() > 1).count();
    check
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{parse_detections, serialize_detections};
    use crate::teta::gt_as_prediction;

    fn noisy() -> SynthConfig {
        SynthConfig {
            box_noise_std: 2.0,
            embedding_noise_std: 0.05,
            detection_drop_rate: 0.1,
            clutter_rate: 0.3,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_noise_reproduces_ground_truth() {
        let (gt, det) = generate_scenario(&SynthConfig::default()).unwrap();
        gt.validate().unwrap();
        assert_eq!(det.n_detections(), gt.annotations.len());
        for frame in &det.frames {
            let boxes: Vec<BBox> = gt
                .annotations
                .iter()
                .filter(|a| a.frame_index == frame.frame_index)
                .map(|a| a.bbox.unwrap())
                .collect();
            let dets: Vec<BBox> = frame.detections.iter().map(|d| d.bbox).collect();
            assert_eq!(dets, boxes);
        }
    }

    #[test]
    fn boxes_stay_inside_image_and_apart() {
        for motion in [MotionModel::ConstantVelocity, MotionModel::Sinusoidal] {
            let cfg = SynthConfig { n_tracks: 10, n_frames: 100, motion, ..Default::default() };
            let (gt, _) = generate_scenario(&cfg).unwrap();
            for t in 0..100 {
                let boxes: Vec<BBox> = gt
                    .annotations
                    .iter()
                    .filter(|a| a.frame_index == t)
                    .map(|a| a.bbox.unwrap())
                    .collect();
                for (i, a) in boxes.iter().enumerate() {
                    assert!(a.x >= 0.0 && a.y >= 0.0);
                    assert!(a.right() <= 1280.0 + 1e-9 && a.bottom() <= 720.0 + 1e-9);
                    for b in &boxes[i + 1..] {
                        assert_eq!(crate::iou(a, b), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scenario(&noisy()).unwrap();
        let b = generate_scenario(&noisy()).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&SynthConfig { seed: 4, ..noisy() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_round_trips() {
        let (gt, det) = generate_scenario(&noisy()).unwrap();
        gt.validate().unwrap();
        let bytes = serialize_detections([&det]).unwrap();
        assert_eq!(parse_detections(&bytes, Some(16)).unwrap(), det);
    }

    #[test]
    fn embeddings_separated() {
        let cfg = SynthConfig { n_tracks: 10, embedding_separation: 1.2, ..Default::default() };
        let (gt, det) = generate_scenario(&cfg).unwrap();
        let first = &det.frames[0].detections;
        assert_eq!(first.len(), gt.annotations.iter().filter(|a| a.frame_index == 0).count());
        for (i, a) in first.iter().enumerate() {
            let norm = a.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            for b in &first[i + 1..] {
                let d: f64 = a.embedding.iter().zip(&b.embedding).map(|(x, y)| (x - y).powi(2)).sum();
                assert!(d.sqrt() >= 1.2);
            }
        }
    }

    #[test]
    fn infeasible_configs() {
        let crowded = SynthConfig { n_tracks: 10_000, image_width: 100, image_height: 100, ..Default::default() };
        assert!(matches!(generate_scenario(&crowded), Err(Error::Infeasible(_))));
        let spread = SynthConfig { embedding_separation: 2.5, ..Default::default() };
        assert!(matches!(generate_scenario(&spread), Err(Error::Infeasible(_))));
        let packed = SynthConfig { n_tracks: 50, embedding_dim: 2, embedding_separation: 1.0, ..Default::default() };
        assert!(matches!(generate_scenario(&packed), Err(Error::Infeasible(_))));
        let bad = SynthConfig { detection_drop_rate: 1.0, ..Default::default() };
        assert!(matches!(generate_scenario(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn drop_rate_within_three_sigma() {
        let cfg = SynthConfig { n_tracks: 10, n_frames: 100, detection_drop_rate: 0.1, seed: 11, ..Default::default() };
        let (gt, det) = generate_scenario(&cfg).unwrap();
        let n = gt.annotations.len() as f64;
        assert_eq!(n, 1000.0);
        let dropped = n - det.n_detections() as f64;
        let sigma = (n * 0.1 * 0.9).sqrt();
        assert!((dropped - 100.0).abs() <= 3.0 * sigma, "dropped {dropped}");
    }

    #[test]
    fn zero_spec_is_identity() {
        let (gt, _) = generate_scenario(&SynthConfig::default()).unwrap();
        let tr = gt_as_prediction(&gt);
        let (out, counts) = inject_errors_logged(&tr, &ErrorSpec { seed: 9, ..Default::default() });
        assert_eq!(out, tr);
        assert_eq!(counts, InjectionCounts::default());
    }

    #[test]
    fn injection_is_pure_and_streams_independent() {
        let (gt, _) = generate_scenario(&SynthConfig::default()).unwrap();
        let tr = gt_as_prediction(&gt);
        let spec = ErrorSpec { id_switch_rate: 0.05, class_flip_rate: 0.1, seed: 5, ..Default::default() };
        assert_eq!(inject_errors(&tr, &spec), inject_errors(&tr, &spec));

        let flips_only = inject_errors(&tr, &ErrorSpec { id_switch_rate: 0.0, ..spec.clone() });
        let both = inject_errors(&tr, &spec);
        let cats = |t: &TrackResult| t.records.iter().map(|r| r.category_id).collect::<Vec<_>>();
        assert_eq!(cats(&flips_only), cats(&both));
    }

    #[test]
    fn id_switches_detected() {
        let (gt, _) = generate_scenario(&SynthConfig::default()).unwrap();
        let clean = gt_as_prediction(&gt);
        assert!(identity_check(&gt, &clean, 0.5).is_relabeling());
        let (dirty, counts) =
            inject_errors_logged(&clean, &ErrorSpec { id_switch_rate: 0.02, seed: 1, ..Default::default() });
        assert!(counts.id_switches > 0);
        let check = identity_check(&gt, &dirty, 0.5);
        assert_eq!(check.id_switches, counts.id_switches);
        assert_eq!(check.merged_predictions, 0);
    }
}
