use serde::Deserialize;

use crate::annotation::{AnnotationSet, GtAnnotation, VideoMeta};
use crate::error::{Error, Result};
use crate::geometry::BBox;

use super::{CategoryTable, Conversion, SynonymMap};

const DEFAULT_FPS: f64 = 30.0;

#[derive(Deserialize)]
struct CocoVideo {
    id: i64,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    file_names: Vec<String>,
    width: u32,
    height: u32,
    #[serde(default)]
    length: Option<u32>,
    #[serde(default)]
    fps: Option<f64>,
    #[serde(default)]
    ann_fps: Option<f64>,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: i64,
    name: String,
}

#[derive(Deserialize)]
struct CocoTrack {
    #[serde(default)]
    id: Option<i64>,
    video_id: i64,
    category_id: i64,
    bboxes: Vec<Option<[f64; 4]>>,
}

#[derive(Deserialize)]
struct CocoVideoDoc {
    videos: Vec<CocoVideo>,
    categories: Vec<CocoCategory>,
    annotations: Vec<CocoTrack>,
}

/// Converts a COCO-video (VIS-style) document where each annotation is one
/// track with a per-frame `bboxes` array and `null` marks absence.
///
/// Nulls before the first or after the last box are trimmed; nulls inside
/// the span become occluded records. Video `length` defaults to the longest
/// `bboxes` array, `fps` to 30 and `ann_fps` to `fps`.
pub fn convert_cocovid(doc: &[u8], synonyms: &SynonymMap, source: &str) -> Result<Conversion> {
    let doc: CocoVideoDoc = serde_json::from_slice(doc)
        .map_err(|e| Error::malformed(format!("line {} column {}", e.line(), e.column()), e))?;

    let table = CategoryTable::build(
        doc.categories.iter().map(|c| (c.id, c.name.as_str())),
        synonyms,
        Some(source),
    )?;

    let videos: Vec<VideoMeta> = doc
        .videos
        .iter()
        .map(|v| {
            let longest = doc
                .annotations
                .iter()
                .filter(|a| a.video_id == v.id)
                .map(|a| a.bboxes.len() as u32)
                .max()
                .unwrap_or(1);
            let fps = v.fps.unwrap_or(DEFAULT_FPS);
            VideoMeta {
                id: v.id,
                name: v
                    .name
                    .clone()
                    .or_else(|| v.file_names.first().and_then(|f| f.split('/').next()).map(str::to_owned))
                    .unwrap_or_else(|| format!("video_{}", v.id)),
                width: v.width,
                height: v.height,
                frame_count: v.length.unwrap_or(longest).max(longest),
                fps,
                ann_fps: v.ann_fps.unwrap_or(fps),
            }
        })
        .collect();

    let mut annotations = Vec::new();
    let mut dropped = 0;
    for (i, track) in doc.annotations.iter().enumerate() {
        let track_id = track.id.unwrap_or(i as i64 + 1);
        let present: Vec<usize> = (0..track.bboxes.len()).filter(|&f| track.bboxes[f].is_some()).collect();
        let Some(category_id) = table.map_id(track.category_id, &format!("annotations[{i}]"))? else {
            dropped += present.len();
            continue;
        };
        let (Some(&first), Some(&last)) = (present.first(), present.last()) else {
            continue;
        };
        for f in first..=last {
            let bbox = track.bboxes[f]
                .map(|b| BBox::try_from(b).map_err(|e| Error::malformed(format!("annotations[{i}].bboxes[{f}]"), e)))
                .transpose()?;
            annotations.push(GtAnnotation {
                video_id: track.video_id,
                frame_index: f as i64,
                track_id,
                category_id,
                bbox,
            });
        }
    }

    let set = AnnotationSet {
        videos,
        categories: table.categories,
        annotations,
    };
    set.validate()?;
    Ok(Conversion { set, dropped })
}
