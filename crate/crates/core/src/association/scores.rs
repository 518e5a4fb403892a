//! Association score matrices. Rows index tracks, columns index detections,
//! and every matrix is oriented as a similarity: larger means a better match.

use serde::{Deserialize, Serialize};

use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::geometry::{iou, iou_matrix, BBox};

/// Which cues feed the association matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationMode {
    /// `(1 - w) * appearance + w * IoU`.
    #[default]
    Fused,
    AppearanceOnly,
    MotionOnly,
}

impl std::str::FromStr for AssociationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused" => Ok(Self::Fused),
            "appearance_only" | "appearance" => Ok(Self::AppearanceOnly),
            "motion_only" | "motion" => Ok(Self::MotionOnly),
            other => Err(Error::Config(format!("unknown association mode {other:?}"))),
        }
    }
}

/// Drops the lower-confidence member of every pair whose IoU exceeds
/// `thresh`. Pairs are visited by descending IoU and a pair is skipped once
/// either member is gone. Returns surviving indices in input order.
pub fn occlusion_prefilter_indices(boxes: &[BBox], scores: &[f64], thresh: f64) -> Vec<usize> {
    let n = boxes.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let o = iou(&boxes[i], &boxes[j]);
            if o > thresh {
                pairs.push((o, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut alive = vec![true; n];
    for (_, i, j) in pairs {
        if !(alive[i] && alive[j]) {
            continue;
        }
        // Equal confidence: the later detection goes.
        if scores[j] > scores[i] {
            alive[i] = false;
        } else {
            alive[j] = false;
        }
    }
    (0..n).filter(|&i| alive[i]).collect()
}

pub fn occlusion_prefilter(dets: &[Detection], thresh: f64) -> Vec<Detection> {
    let boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    occlusion_prefilter_indices(&boxes, &scores, thresh)
        .into_iter()
        .map(|i| dets[i].clone())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_shapes(tracks: &[Vec<f64>], dets: &[Vec<f64>]) -> Result<()> {
    let dim = tracks.first().or(dets.first()).map_or(0, Vec::len);
    for e in tracks.iter().chain(dets) {
        if e.len() != dim {
            return Err(Error::EmbeddingShape(dim, e.len()));
        }
    }
    Ok(())
}

/// Bi-softmax similarity: the dot-product softmax over detections for each
/// track, averaged with the softmax over tracks for each detection.
pub fn bi_softmax_matrix(tracks: &[Vec<f64>], dets: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_shapes(tracks, dets)?;
    let logits: Vec<Vec<f64>> = tracks
        .iter()
        .map(|t| dets.iter().map(|d| dot(t, d)).collect())
        .collect();
    if tracks.is_empty() || dets.is_empty() {
        return Ok(logits);
    }

    let row_max: Vec<f64> = logits
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let row_sum: Vec<f64> = logits
        .iter()
        .zip(&row_max)
        .map(|(row, m)| row.iter().map(|x| (x - m).exp()).sum())
        .collect();
    let col_max: Vec<f64> = (0..dets.len())
        .map(|c| logits.iter().map(|row| row[c]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let col_sum: Vec<f64> = (0..dets.len())
        .map(|c| logits.iter().map(|row| (row[c] - col_max[c]).exp()).sum())
        .collect();

    Ok(logits
        .iter()
        .enumerate()
        .map(|(t, row)| {
            row.iter()
                .enumerate()
                .map(|(r, &x)| {
                    let over_dets = (x - row_max[t]).exp() / row_sum[t];
                    let over_tracks = (x - col_max[r]).exp() / col_sum[r];
                    0.5 * (over_dets + over_tracks)
                })
                .collect()
        })
        .collect())
}

/// Cosine similarity of every track/detection pair.
pub fn cosine_matrix(tracks: &[Vec<f64>], dets: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_shapes(tracks, dets)?;
    let norms = |side: &'static str, v: &[Vec<f64>]| -> Result<Vec<f64>> {
        v.iter()
            .enumerate()
            .map(|(index, e)| {
                let n = norm(e);
                if n > 0.0 && n.is_finite() {
                    Ok(n)
                } else {
                    Err(Error::ZeroNorm { side, index })
                }
            })
            .collect()
    };
    let tn = norms("track", tracks)?;
    let dn = norms("detection", dets)?;
    Ok(tracks
        .iter()
        .zip(&tn)
        .map(|(t, nt)| {
            dets.iter()
                .zip(&dn)
                .map(|(d, nd)| (dot(t, d) / (nt * nd)).clamp(-1.0, 1.0))
                .collect()
        })
        .collect())
}

/// Appearance score `½(1 + cos) + S_bi`, in `[0, 2]`.
pub fn appearance_score_matrix(tracks: &[Vec<f64>], dets: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let cos = cosine_matrix(tracks, dets)?;
    let bi = bi_softmax_matrix(tracks, dets)?;
    Ok(cos
        .iter()
        .zip(&bi)
        .map(|(c_row, b_row)| {
            c_row
                .iter()
                .zip(b_row)
                .map(|(c, b)| 0.5 * (1.0 + c) + b)
                .collect()
        })
        .collect())
}

/// Combines appearance and motion cues according to `mode`. `app` may be
/// `None` only in motion-only mode.
pub fn fused_score_matrix(
    app: Option<&[Vec<f64>]>,
    predicted: &[BBox],
    dets: &[BBox],
    w: f64,
    mode: AssociationMode,
) -> Result<Vec<Vec<f64>>> {
    let need_app = || {
        app.ok_or_else(|| Error::Config("appearance scores required outside motion-only mode".into()))
    };
    match mode {
        AssociationMode::MotionOnly => Ok(iou_matrix(predicted, dets)),
        AssociationMode::AppearanceOnly => Ok(need_app()?.to_vec()),
        AssociationMode::Fused => {
            let app = need_app()?;
            let overlap = iou_matrix(predicted, dets);
            Ok(app
                .iter()
                .zip(&overlap)
                .map(|(a_row, o_row)| {
                    a_row
                        .iter()
                        .zip(o_row)
                        .map(|(a, o)| (1.0 - w) * a + w * o)
                        .collect()
                })
                .collect())
        }
    }
}

/// Exponential moving average: `alpha * previous + (1 - alpha) * new`.
pub fn update_embedding(previous: &[f64], new: &[f64], alpha: f64) -> Vec<f64> {
    previous
        .iter()
        .zip(new)
        .map(|(p, f)| alpha * p + (1.0 - alpha) * f)
        .collect()
}

/// Scales `e` to unit length.
pub fn normalize(e: &[f64]) -> Option<Vec<f64>> {
    let n = norm(e);
    (n > 0.0 && n.is_finite()).then(|| e.iter().map(|x| x / n).collect())
}
