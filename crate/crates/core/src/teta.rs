//! TETA: localization (LocA), classification (ClsA) and association (AssA)
//! accuracy, and their mean, reported overall and per base/novel split.
//!
//! Localization is a class-agnostic per-frame matching that maximizes total
//! IoU over pairs at or above the threshold. Ground-truth records without a
//! box (full occlusion) take no part in it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, GtAnnotation, Split, VideoMeta};
use crate::assignment::hungarian_assign;
use crate::association::{TrackRecord, TrackResult};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

pub const DEFAULT_LOC_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocMatch {
    pub video_id: i64,
    pub frame_index: i64,
    pub gt_track_id: i64,
    pub pred_track_id: i64,
    pub gt_category_id: i64,
    pub pred_category_id: i64,
    pub iou: f64,
}

/// Outcome of matching one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatching {
    pub matches: Vec<LocMatch>,
    /// Categories of predictions left unmatched (one entry per FPL).
    pub unmatched_pred_categories: Vec<i64>,
    /// Categories of visible ground truth left unmatched (one entry per FNL).
    pub unmatched_gt_categories: Vec<i64>,
}

impl FrameMatching {
    pub fn fpl(&self) -> usize {
        self.unmatched_pred_categories.len()
    }

    pub fn fnl(&self) -> usize {
        self.unmatched_gt_categories.len()
    }
}

/// Matches one frame's ground truth against its predictions.
pub fn match_localization(
    gt: &[&GtAnnotation],
    pred: &[&TrackRecord],
    loc_iou_thresh: f64,
) -> FrameMatching {
    let mut visible: Vec<(&GtAnnotation, BBox)> =
        gt.iter().filter_map(|a| a.bbox.map(|b| (*a, b))).collect();
    visible.sort_by_key(|(a, _)| a.track_id);
    let mut pred: Vec<&TrackRecord> = pred.to_vec();
    pred.sort_by(|a, b| {
        (a.track_id, a.category_id)
            .cmp(&(b.track_id, b.category_id))
            .then(a.bbox.to_array().partial_cmp(&b.bbox.to_array()).unwrap_or(std::cmp::Ordering::Equal))
    });

    let overlaps: Vec<Vec<f64>> = visible
        .iter()
        .map(|(_, g)| {
            pred.iter()
                .map(|p| {
                    let o = iou(g, &p.bbox);
                    if o >= loc_iou_thresh {
                        o
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let mut gt_used = vec![false; visible.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut matches = Vec::new();
    for (g, p) in hungarian_assign(&overlaps) {
        let o = overlaps[g][p];
        if o < loc_iou_thresh || o <= 0.0 {
            continue;
        }
        gt_used[g] = true;
        pred_used[p] = true;
        let (a, _) = visible[g];
        matches.push(LocMatch {
            video_id: a.video_id,
            frame_index: a.frame_index,
            gt_track_id: a.track_id,
            pred_track_id: pred[p].track_id,
            gt_category_id: a.category_id,
            pred_category_id: pred[p].category_id,
            iou: o,
        });
    }
    FrameMatching {
        matches,
        unmatched_pred_categories: pred
            .iter()
            .zip(&pred_used)
            .filter(|(_, &u)| !u)
            .map(|(p, _)| p.category_id)
            .collect(),
        unmatched_gt_categories: visible
            .iter()
            .zip(&gt_used)
            .filter(|(_, &u)| !u)
            .map(|((a, _), _)| a.category_id)
            .collect(),
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn compute_loca(tpl: usize, fpl: usize, fnl: usize) -> f64 {
    ratio(tpl, tpl + fpl + fnl)
}

/// `(tpc, fpc, fnc)` over TPL records; each misclassified match is one FPC
/// and one FNC.
pub fn classification_counts(matches: &[LocMatch]) -> (usize, usize, usize) {
    let tpc = matches
        .iter()
        .filter(|m| m.pred_category_id == m.gt_category_id)
        .count();
    let wrong = matches.len() - tpc;
    (tpc, wrong, wrong)
}

pub fn compute_clsa(matches: &[LocMatch]) -> f64 {
    let (tpc, fpc, fnc) = classification_counts(matches);
    ratio(tpc, tpc + fpc + fnc)
}

/// Per-match association fraction `TPA / (TPA + FPA + FNA)`, aligned with
/// `matches`. Counts range over all of `matches`; track ids are scoped by
/// video.
pub fn association_fractions(matches: &[LocMatch]) -> Vec<f64> {
    let mut pair: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut by_gt: HashMap<(i64, i64), usize> = HashMap::new();
    let mut by_pred: HashMap<(i64, i64), usize> = HashMap::new();
    for m in matches {
        *pair.entry((m.video_id, m.gt_track_id, m.pred_track_id)).or_default() += 1;
        *by_gt.entry((m.video_id, m.gt_track_id)).or_default() += 1;
        *by_pred.entry((m.video_id, m.pred_track_id)).or_default() += 1;
    }
    matches
        .iter()
        .map(|m| {
            let tpa = pair[&(m.video_id, m.gt_track_id, m.pred_track_id)];
            let fna = by_gt[&(m.video_id, m.gt_track_id)] - tpa;
            let fpa = by_pred[&(m.video_id, m.pred_track_id)] - tpa;
            tpa as f64 / (tpa + fpa + fna) as f64
        })
        .collect()
}

fn mean_percent(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        100.0 * sum / n as f64
    }
}

pub fn compute_assa(matches: &[LocMatch]) -> f64 {
    mean_percent(association_fractions(matches).into_iter())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TetaCounts {
    pub tpl: usize,
    pub fpl: usize,
    pub fnl: usize,
    pub tpc: usize,
    pub fpc: usize,
    pub fnc: usize,
    /// One association fraction per TPL.
    #[serde(skip)]
    pub assoc_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCounts {
    pub threshold: f64,
    #[serde(flatten)]
    pub counts: TetaCounts,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub teta: f64,
    pub loca: f64,
    pub assa: f64,
    pub clsa: f64,
    pub counts: Vec<ThresholdCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetaReport {
    pub thresholds: Vec<f64>,
    pub all: SplitScores,
    pub base: SplitScores,
    pub novel: SplitScores,
}

impl TetaReport {
    pub fn splits(&self) -> [(&'static str, &SplitScores); 3] {
        [("All", &self.all), ("Base", &self.base), ("Novel", &self.novel)]
    }

    /// CSV with one row per split, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,TETA,LocA,AssA,ClsA\n");
        for (name, s) in self.splits() {
            out.push_str(&format!("{name},{},{},{},{}\n", s.teta, s.loca, s.assa, s.clsa));
        }
        out
    }
}

/// Matching results for one video, one entry per threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VideoEvaluation {
    pub video_id: i64,
    pub per_threshold: Vec<FrameMatching>,
}

/// Frames of `video` that take part in evaluation: the annotation stride
/// plus any frame holding a ground-truth record.
pub fn evaluated_frames(video: &VideoMeta, gt_frames: impl Iterator<Item = i64>) -> BTreeSet<i64> {
    let stride = video.annotation_stride() as usize;
    let mut frames: BTreeSet<i64> = (0..video.frame_count as i64).step_by(stride).collect();
    frames.extend(gt_frames);
    frames
}

/// Matches every evaluated frame of one video at each threshold.
pub fn evaluate_video(
    video: &VideoMeta,
    gt: &[&GtAnnotation],
    pred: &[&TrackRecord],
    thresholds: &[f64],
) -> VideoEvaluation {
    let mut gt_by_frame: BTreeMap<i64, Vec<&GtAnnotation>> = BTreeMap::new();
    for a in gt {
        gt_by_frame.entry(a.frame_index).or_default().push(a);
    }
    let frames = evaluated_frames(video, gt_by_frame.keys().copied());
    let mut pred_by_frame: BTreeMap<i64, Vec<&TrackRecord>> = BTreeMap::new();
    for p in pred {
        if frames.contains(&p.frame_index) {
            pred_by_frame.entry(p.frame_index).or_default().push(p);
        }
    }

    let per_threshold = thresholds
        .iter()
        .map(|&thresh| {
            let mut acc = FrameMatching::default();
            let active: BTreeSet<i64> = gt_by_frame.keys().chain(pred_by_frame.keys()).copied().collect();
            for f in active {
                let g = gt_by_frame.get(&f).map_or(&[][..], Vec::as_slice);
                let p = pred_by_frame.get(&f).map_or(&[][..], Vec::as_slice);
                let m = match_localization(g, p, thresh);
                acc.matches.extend(m.matches);
                acc.unmatched_pred_categories.extend(m.unmatched_pred_categories);
                acc.unmatched_gt_categories.extend(m.unmatched_gt_categories);
            }
            acc
        })
        .collect();
    VideoEvaluation {
        video_id: video.id,
        per_threshold,
    }
}

/// One video's metadata with its ground-truth and predicted records.
pub type VideoGroup<'a> = (&'a VideoMeta, Vec<&'a GtAnnotation>, Vec<&'a TrackRecord>);

/// Groups ground truth and predictions per video, rejecting predictions for
/// videos absent from the ground truth.
pub fn group_by_video<'a>(
    gt: &'a AnnotationSet,
    pred: &'a TrackResult,
) -> Result<Vec<VideoGroup<'a>>> {
    let mut gt_by_video: HashMap<i64, Vec<&GtAnnotation>> = HashMap::new();
    for a in &gt.annotations {
        gt_by_video.entry(a.video_id).or_default().push(a);
    }
    let mut pred_by_video: HashMap<i64, Vec<&TrackRecord>> = HashMap::new();
    for p in &pred.records {
        if gt.video(p.video_id).is_none() {
            return Err(Error::VideoMismatch(p.video_id));
        }
        pred_by_video.entry(p.video_id).or_default().push(p);
    }
    let mut videos: Vec<&VideoMeta> = gt.videos.iter().collect();
    videos.sort_by_key(|v| v.id);
    Ok(videos
        .into_iter()
        .map(|v| {
            (
                v,
                gt_by_video.remove(&v.id).unwrap_or_default(),
                pred_by_video.remove(&v.id).unwrap_or_default(),
            )
        })
        .collect())
}

/// Full evaluation over every video, sequentially.
pub fn compute_teta(gt: &AnnotationSet, pred: &TrackResult, thresholds: &[f64]) -> Result<TetaReport> {
    let evals = group_by_video(gt, pred)?
        .iter()
        .map(|(v, g, p)| evaluate_video(v, g, p, thresholds))
        .collect();
    Ok(reduce(gt, evals, thresholds))
}

/// Combines per-video results (in any order) into a report.
pub fn reduce(gt: &AnnotationSet, mut evals: Vec<VideoEvaluation>, thresholds: &[f64]) -> TetaReport {
    evals.sort_by_key(|e| e.video_id);
    let split_of: HashMap<i64, Split> = gt.categories.iter().map(|c| (c.id, c.split)).collect();

    let mut all = Vec::new();
    let mut base = Vec::new();
    let mut novel = Vec::new();
    for (ti, &threshold) in thresholds.iter().enumerate() {
        let mut matches = Vec::new();
        let mut fp_cats = Vec::new();
        let mut fn_cats = Vec::new();
        for e in &evals {
            let m = &e.per_threshold[ti];
            matches.extend(m.matches.iter().cloned());
            fp_cats.extend(&m.unmatched_pred_categories);
            fn_cats.extend(&m.unmatched_gt_categories);
        }
        let fractions = association_fractions(&matches);

        let counts_for = |keep: &dyn Fn(Option<Split>) -> bool, fp_known_only: bool| {
            let idx: Vec<usize> = (0..matches.len())
                .filter(|&i| keep(split_of.get(&matches[i].gt_category_id).copied()))
                .collect();
            let subset: Vec<LocMatch> = idx.iter().map(|&i| matches[i].clone()).collect();
            let (tpc, fpc, fnc) = classification_counts(&subset);
            let fpl = fp_cats
                .iter()
                .filter(|c| {
                    let s = split_of.get(c).copied();
                    if fp_known_only {
                        s.is_some() && keep(s)
                    } else {
                        keep(s)
                    }
                })
                .count();
            let fnl = fn_cats
                .iter()
                .filter(|c| keep(split_of.get(c).copied()))
                .count();
            ThresholdCounts {
                threshold,
                counts: TetaCounts {
                    tpl: subset.len(),
                    fpl,
                    fnl,
                    tpc,
                    fpc,
                    fnc,
                    assoc_fractions: idx.iter().map(|&i| fractions[i]).collect(),
                },
            }
        };
        all.push(counts_for(&|_| true, false));
        base.push(counts_for(&|s| s == Some(Split::Base), true));
        novel.push(counts_for(&|s| s == Some(Split::Novel), true));
    }

    TetaReport {
        thresholds: thresholds.to_vec(),
        all: scores_from(all),
        base: scores_from(base),
        novel: scores_from(novel),
    }
}

fn scores_from(counts: Vec<ThresholdCounts>) -> SplitScores {
    let n = counts.len().max(1) as f64;
    let (mut loca, mut clsa, mut assa) = (0.0, 0.0, 0.0);
    for ThresholdCounts { counts: c, .. } in &counts {
        loca += compute_loca(c.tpl, c.fpl, c.fnl);
        clsa += ratio(c.tpc, c.tpc + c.fpc + c.fnc);
        assa += mean_percent(c.assoc_fractions.iter().copied());
    }
    let (loca, clsa, assa) = (loca / n, clsa / n, assa / n);
    SplitScores {
        teta: (loca + clsa + assa) / 3.0,
        loca,
        assa,
        clsa,
        counts,
    }
}

/// Turns ground truth into a perfect prediction: every visible box becomes
/// a record with the true track id and category.
pub fn gt_as_prediction(gt: &AnnotationSet) -> TrackResult {
    TrackResult {
        records: gt
            .annotations
            .iter()
            .filter_map(|a| {
                a.bbox.map(|bbox| TrackRecord {
                    video_id: a.video_id,
                    frame_index: a.frame_index,
                    track_id: a.track_id,
                    category_id: a.category_id,
                    bbox,
                    score: 1.0,
                })
            })
            .collect(),
    }
}
