use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::scores::{
    appearance_score_matrix, fused_score_matrix, normalize, occlusion_prefilter_indices,
    update_embedding, AssociationMode,
};
use crate::assignment::hungarian_assign;
use crate::detection::{Detection, DetectionFrame, DetectionSequence};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::motion::{KalmanConfig, KalmanFilter, KalmanState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Weight of the IoU term in the fused score.
    pub w: f64,
    /// EMA momentum on the stored embedding.
    pub alpha: f64,
    /// Minimum fused score for an assigned pair to count as a match.
    pub match_threshold: f64,
    /// A leftover detection starts a track only if its IoU with every
    /// predicted track box stays below this.
    pub init_iou_threshold: f64,
    /// Frames a track survives without a match.
    pub memory_frames: u32,
    pub occlusion_iou_threshold: f64,
    pub mode: AssociationMode,
    /// L2-normalize detection embeddings before scoring.
    pub normalize_embeddings: bool,
    pub kalman: KalmanConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            w: 0.03,
            alpha: 0.2,
            match_threshold: 0.5,
            init_iou_threshold: 0.3,
            memory_frames: 30,
            occlusion_iou_threshold: 0.7,
            mode: AssociationMode::Fused,
            normalize_embeddings: false,
            kalman: KalmanConfig::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        unit("w", self.w)?;
        unit("alpha", self.alpha)?;
        unit("init_iou_threshold", self.init_iou_threshold)?;
        unit("occlusion_iou_threshold", self.occlusion_iou_threshold)?;
        if !self.match_threshold.is_finite() {
            return Err(Error::Config("match_threshold must be finite".into()));
        }
        self.kalman.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveTrack {
    pub track_id: i64,
    /// Stored appearance embedding; empty in motion-only mode.
    pub embedding: Vec<f64>,
    pub kalman: KalmanState,
    pub last_matched_frame: i64,
    /// Majority vote over matched detections' categories.
    pub category_id: i64,
    pub history: Vec<(i64, BBox)>,
    votes: BTreeMap<i64, (u32, i64)>,
}

impl ActiveTrack {
    fn vote(&mut self, category: i64, frame_index: i64) {
        let entry = self.votes.entry(category).or_insert((0, frame_index));
        entry.0 += 1;
        entry.1 = frame_index;
        // Most votes, then most recent.
        self.category_id = self
            .votes
            .iter()
            .max_by_key(|(_, &(count, last))| (count, last))
            .map(|(&c, _)| c)
            .unwrap_or(category);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub video_id: i64,
    pub frame_index: i64,
    pub track_id: i64,
    pub category_id: i64,
    pub bbox: BBox,
    pub score: f64,
}

/// Tracker output, serialized as a flat JSON array of records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackResult {
    pub records: Vec<TrackRecord>,
}

impl TrackResult {
    pub fn parse(document: &[u8]) -> Result<Self> {
        let result: TrackResult = serde_json::from_slice(document).map_err(|e| {
            Error::malformed(format!("line {} column {}", e.line(), e.column()), e)
        })?;
        result.validate()?;
        Ok(result)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(self)?)
    }

    /// (frame, track) pairs must be unique within each video.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            if !seen.insert((r.video_id, r.frame_index, r.track_id)) {
                return Err(Error::Duplicate {
                    location: format!("records[{i}]"),
                    what: format!(
                        "(video {}, frame {}, track {})",
                        r.video_id, r.frame_index, r.track_id
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn by_video(&self) -> BTreeMap<i64, Vec<&TrackRecord>> {
        let mut out: BTreeMap<i64, Vec<&TrackRecord>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.video_id).or_default().push(r);
        }
        out
    }

    pub fn extend(&mut self, other: TrackResult) {
        self.records.extend(other.records);
    }
}

/// Per-video tracker state. Frames must be fed in increasing order.
#[derive(Debug, Clone)]
pub struct TrackerState {
    pub video_id: i64,
    pub tracks: Vec<ActiveTrack>,
    pub next_id: i64,
    pub frame_cursor: Option<i64>,
    pub config: TrackerConfig,
    filter: KalmanFilter,
}

impl TrackerState {
    pub fn new(video_id: i64, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(TrackerState {
            video_id,
            tracks: Vec::new(),
            next_id: 1,
            frame_cursor: None,
            filter: KalmanFilter::new(config.kalman),
            config,
        })
    }

    /// Processes one frame and returns the records emitted for it: every
    /// matched track plus every track started in this frame.
    ///
    /// The state is left untouched when an error is returned.
    pub fn step(&mut self, frame_index: i64, detections: &[Detection]) -> Result<Vec<TrackRecord>> {
        let gap = match self.frame_cursor {
            Some(cursor) if frame_index <= cursor => {
                return Err(Error::OutOfOrderFrame { cursor, frame_index })
            }
            Some(cursor) => frame_index - cursor,
            None => 1,
        };
        let cfg = &self.config;
        let mode = cfg.mode;
        let uses_appearance = mode != AssociationMode::MotionOnly;

        // 1. Occlusion pre-filter.
        let boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
        let confidences: Vec<f64> = detections.iter().map(|d| d.score).collect();
        let kept = occlusion_prefilter_indices(&boxes, &confidences, cfg.occlusion_iou_threshold);
        let dets: Vec<&Detection> = kept.iter().map(|&i| &detections[i]).collect();
        let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
        let det_embeddings: Vec<Vec<f64>> = if uses_appearance {
            dets.iter()
                .enumerate()
                .map(|(index, d)| {
                    if cfg.normalize_embeddings {
                        normalize(&d.embedding).ok_or(Error::ZeroNorm { side: "detection", index })
                    } else {
                        Ok(d.embedding.clone())
                    }
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };

        // 2. Motion prediction for every live track.
        let mut predicted_states = Vec::with_capacity(self.tracks.len());
        let mut predicted_boxes = Vec::with_capacity(self.tracks.len());
        for t in &self.tracks {
            let mut state = t.kalman.clone();
            let mut b = state.bbox();
            for _ in 0..gap {
                (state, b) = self.filter.predict(&state);
            }
            predicted_states.push(state);
            predicted_boxes.push(b);
        }

        // 3-4. Score matrix and optimal assignment.
        let mut matches: Vec<(usize, usize)> = Vec::new();
        if !self.tracks.is_empty() && !dets.is_empty() {
            let app = if uses_appearance {
                let track_embeddings: Vec<Vec<f64>> =
                    self.tracks.iter().map(|t| t.embedding.clone()).collect();
                Some(appearance_score_matrix(&track_embeddings, &det_embeddings)?)
            } else {
                None
            };
            let scores = fused_score_matrix(app.as_deref(), &predicted_boxes, &det_boxes, cfg.w, mode)?;
            matches = hungarian_assign(&scores)
                .into_iter()
                .filter(|&(t, r)| scores[t][r] >= cfg.match_threshold)
                .collect();
        }

        // Everything below is infallible; commit.
        let mut outputs = Vec::new();
        let mut det_matched = vec![false; dets.len()];
        let mut track_matched = vec![false; self.tracks.len()];
        let mut updated = Vec::with_capacity(matches.len());
        for &(t, r) in &matches {
            let post = self
                .filter
                .update(&predicted_states[t], &det_boxes[r])
                .expect("detection boxes are validated on construction");
            updated.push((t, r, post));
        }

        // 5. Accepted matches: Kalman correction, EMA, bookkeeping.
        for (t, r, post) in updated {
            let track = &mut self.tracks[t];
            let det = dets[r];
            track.kalman = post;
            if uses_appearance {
                track.embedding = update_embedding(&track.embedding, &det_embeddings[r], self.config.alpha);
            }
            track.last_matched_frame = frame_index;
            track.vote(det.assigned_category, frame_index);
            track.history.push((frame_index, det.bbox));
            det_matched[r] = true;
            track_matched[t] = true;
            outputs.push(TrackRecord {
                video_id: self.video_id,
                frame_index,
                track_id: track.track_id,
                category_id: track.category_id,
                bbox: det.bbox,
                score: det.score,
            });
        }
        for (t, track) in self.tracks.iter_mut().enumerate() {
            if !track_matched[t] {
                track.kalman = predicted_states[t].clone();
            }
        }

        // 7. Retire tracks past their memory.
        let memory = self.config.memory_frames as i64;
        self.tracks
            .retain(|t| frame_index - t.last_matched_frame <= memory);

        // 6. New tracks from leftover detections clear of every prediction.
        for (r, det) in dets.iter().enumerate() {
            if det_matched[r] {
                continue;
            }
            let max_overlap = predicted_boxes
                .iter()
                .map(|p| iou(p, &det.bbox))
                .fold(0.0, f64::max);
            if max_overlap >= self.config.init_iou_threshold {
                continue;
            }
            let track_id = self.next_id;
            self.next_id += 1;
            let mut track = ActiveTrack {
                track_id,
                embedding: if uses_appearance { det_embeddings[r].clone() } else { Vec::new() },
                kalman: self.filter.init(&det.bbox),
                last_matched_frame: frame_index,
                category_id: det.assigned_category,
                history: vec![(frame_index, det.bbox)],
                votes: BTreeMap::new(),
            };
            track.vote(det.assigned_category, frame_index);
            outputs.push(TrackRecord {
                video_id: self.video_id,
                frame_index,
                track_id,
                category_id: track.category_id,
                bbox: det.bbox,
                score: det.score,
            });
            self.tracks.push(track);
        }

        self.frame_cursor = Some(frame_index);
        Ok(outputs)
    }
}

/// Runs one video's detections through a fresh tracker.
pub fn run_tracker(dets: &DetectionSequence, config: &TrackerConfig) -> Result<TrackResult> {
    let mut state = TrackerState::new(dets.video_id, config.clone())?;
    let mut records = Vec::new();
    for DetectionFrame {
        frame_index,
        detections,
    } in &dets.frames
    {
        records.extend(state.step(*frame_index, detections)?);
    }
    Ok(TrackResult { records })
}
