//! Detector output: one JSON object per line, one line per (video, frame).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Category id given to detections that carry no class scores.
pub const UNKNOWN_CATEGORY: i64 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub class_scores: Option<BTreeMap<i64, f64>>,
    pub embedding: Vec<f64>,
    /// Argmax of `class_scores` (lowest id on ties), or [`UNKNOWN_CATEGORY`].
    pub assigned_category: i64,
}

impl Detection {
    pub fn new(
        bbox: BBox,
        score: f64,
        class_scores: Option<BTreeMap<i64, f64>>,
        embedding: Vec<f64>,
    ) -> Self {
        let assigned_category = class_scores
            .as_ref()
            .and_then(argmax_category)
            .unwrap_or(UNKNOWN_CATEGORY);
        Detection {
            bbox,
            score,
            class_scores,
            embedding,
            assigned_category,
        }
    }
}

fn argmax_category(scores: &BTreeMap<i64, f64>) -> Option<i64> {
    let mut best: Option<(i64, f64)> = None;
    for (&id, &s) in scores {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((id, s)),
        }
    }
    best.map(|(id, _)| id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFrame {
    pub frame_index: i64,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSequence {
    pub video_id: i64,
    pub frames: Vec<DetectionFrame>,
}

impl DetectionSequence {
    pub fn embedding_dim(&self) -> Option<usize> {
        self.frames
            .iter()
            .flat_map(|f| f.detections.first())
            .map(|d| d.embedding.len())
            .next()
    }

    pub fn n_detections(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    bbox: BBox,
    score: f64,
    #[serde(default)]
    class_scores: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    embedding: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    video_id: i64,
    frame_index: i64,
    detections: Vec<DetectionRecord>,
}

/// Parses a detection file holding a single video.
///
/// `expected_dim` of `None` takes the dimension of the first embedding seen.
pub fn parse_detections(document: &[u8], expected_dim: Option<usize>) -> Result<DetectionSequence> {
    let mut seqs = parse_detection_file(document, expected_dim)?;
    match seqs.len() {
        0 => Ok(DetectionSequence {
            video_id: 0,
            frames: Vec::new(),
        }),
        1 => Ok(seqs.remove(0)),
        n => Err(Error::invalid(
            "detections",
            format!("expected one video, found {n}"),
        )),
    }
}

/// Parses a detection file that may interleave several videos. Sequences are
/// returned sorted by video id; within each video, frame indices must be
/// strictly increasing in file order.
pub fn parse_detection_file(
    document: &[u8],
    expected_dim: Option<usize>,
) -> Result<Vec<DetectionSequence>> {
    let text = std::str::from_utf8(document).map_err(|e| Error::malformed("detections", e))?;
    let mut dim = expected_dim;
    let mut videos: BTreeMap<i64, Vec<DetectionFrame>> = BTreeMap::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord = serde_json::from_str(line)
            .map_err(|e| Error::malformed(format!("line {line_no}"), e))?;
        let frames = videos.entry(rec.video_id).or_default();
        if let Some(prev) = frames.last() {
            if rec.frame_index <= prev.frame_index {
                return Err(Error::FrameOrder {
                    line: line_no,
                    video_id: rec.video_id,
                    previous: prev.frame_index,
                    frame_index: rec.frame_index,
                });
            }
        }
        let mut detections = Vec::with_capacity(rec.detections.len());
        for d in rec.detections {
            let expected = *dim.get_or_insert(d.embedding.len());
            if d.embedding.len() != expected {
                return Err(Error::DimensionMismatch {
                    line: line_no,
                    expected,
                    found: d.embedding.len(),
                });
            }
            if !d.score.is_finite() {
                return Err(Error::malformed(format!("line {line_no}"), "non-finite score"));
            }
            let class_scores = d
                .class_scores
                .map(|m| {
                    m.into_iter()
                        .map(|(k, v)| {
                            k.trim().parse::<i64>().map(|id| (id, v)).map_err(|_| {
                                Error::malformed(
                                    format!("line {line_no}"),
                                    format!("class score key {k:?} is not a category id"),
                                )
                            })
                        })
                        .collect::<Result<BTreeMap<_, _>>>()
                })
                .transpose()?;
            detections.push(Detection::new(d.bbox, d.score, class_scores, d.embedding));
        }
        frames.push(DetectionFrame {
            frame_index: rec.frame_index,
            detections,
        });
    }

    Ok(videos
        .into_iter()
        .map(|(video_id, frames)| DetectionSequence { video_id, frames })
        .collect())
}

/// Writes sequences as JSON Lines, one line per frame.
pub fn serialize_detections<'a>(
    seqs: impl IntoIterator<Item = &'a DetectionSequence>,
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for seq in seqs {
        for frame in &seq.frames {
            let rec = FrameRecord {
                video_id: seq.video_id,
                frame_index: frame.frame_index,
                detections: frame
                    .detections
                    .iter()
                    .map(|d| DetectionRecord {
                        bbox: d.bbox,
                        score: d.score,
                        class_scores: d.class_scores.as_ref().map(|m| {
                            m.iter().map(|(k, v)| (k.to_string(), *v)).collect()
                        }),
                        embedding: d.embedding.clone(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(frame: i64, n: usize, dim: usize) -> String {
        let dets: Vec<String> = (0..n)
            .map(|i| {
                let emb = vec!["0.5"; dim].join(",");
                format!(
                    r#"{{"bbox":[{},0,10,10],"score":0.9,"class_scores":{{"3":0.2,"5":0.7}},"embedding":[{emb}]}}"#,
                    i * 20
                )
            })
            .collect();
        format!(
            r#"{{"video_id":1,"frame_index":{frame},"detections":[{}]}}"#,
            dets.join(",")
        )
    }

    #[test]
    fn two_frames() {
        let doc = format!("{}\n{}\n", line(0, 3, 4), line(1, 3, 4));
        let seq = parse_detections(doc.as_bytes(), Some(4)).unwrap();
        assert_eq!(seq.frames.len(), 2);
        assert_eq!(seq.n_detections(), 6);
        assert_eq!(seq.frames[0].detections[0].assigned_category, 5);
    }

    #[test]
    fn frame_order_error_names_line() {
        let doc = format!("{}\n{}\n", line(5, 1, 2), line(3, 1, 2));
        let err = parse_detections(doc.as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::FrameOrder { line: 2, .. }), "{err}");
    }

    #[test]
    fn dimension_mismatch() {
        let doc = line(0, 1, 127);
        let err = parse_detections(doc.as_bytes(), Some(128)).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch { expected: 128, found: 127, .. }
        ));
    }

    #[test]
    fn missing_class_scores_is_unknown() {
        let doc = r#"{"video_id":2,"frame_index":0,"detections":[{"bbox":[0,0,1,1],"score":0.3,"class_scores":null,"embedding":[1]}]}"#;
        let seq = parse_detections(doc.as_bytes(), None).unwrap();
        assert_eq!(seq.frames[0].detections[0].assigned_category, UNKNOWN_CATEGORY);
    }

    #[test]
    fn argmax_ties_take_lowest_id() {
        let m: BTreeMap<i64, f64> = [(4, 0.5), (2, 0.5), (9, 0.1)].into_iter().collect();
        assert_eq!(argmax_category(&m), Some(2));
    }

    #[test]
    fn round_trip() {
        let doc = format!("{}\n{}\n", line(0, 2, 3), line(4, 1, 3));
        let seq = parse_detections(doc.as_bytes(), None).unwrap();
        let bytes = serialize_detections([&seq]).unwrap();
        assert_eq!(parse_detections(&bytes, None).unwrap(), seq);
    }
}
