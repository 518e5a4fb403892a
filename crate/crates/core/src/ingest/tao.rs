use std::collections::HashMap;

use serde::Deserialize;

use crate::annotation::{AnnotationSet, Category, GtAnnotation, Split, VideoMeta};
use crate::error::{Error, Result};
use crate::geometry::BBox;

use super::Conversion;

#[derive(Deserialize)]
struct TaoVideo {
    id: i64,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    width: Option<u32>,
    #[serde(default)]
    height: Option<u32>,
    #[serde(default)]
    frame_count: Option<u32>,
    #[serde(default)]
    fps: Option<f64>,
    #[serde(default)]
    ann_fps: Option<f64>,
}

#[derive(Deserialize)]
struct TaoImage {
    id: i64,
    video_id: i64,
    frame_index: i64,
    #[serde(default)]
    width: Option<u32>,
    #[serde(default)]
    height: Option<u32>,
}

#[derive(Deserialize)]
struct TaoCategory {
    id: i64,
    name: String,
    #[serde(default)]
    split: Option<Split>,
}

#[derive(Deserialize)]
struct TaoAnnotation {
    image_id: i64,
    track_id: i64,
    category_id: i64,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
}

#[derive(Deserialize)]
struct TaoDoc {
    videos: Vec<TaoVideo>,
    images: Vec<TaoImage>,
    categories: Vec<TaoCategory>,
    annotations: Vec<TaoAnnotation>,
}

/// Reads a native TAO document (`videos`, `images`, `annotations` keyed by
/// `image_id`, `categories`). Missing video dimensions come from the first
/// image, frame counts from the largest image frame index, `fps` defaults
/// to 30 and `ann_fps` to `fps`. Annotations with zero-area boxes are
/// dropped and counted.
pub fn convert_tao(doc: &[u8]) -> Result<Conversion> {
    let doc: TaoDoc = serde_json::from_slice(doc)
        .map_err(|e| Error::malformed(format!("line {} column {}", e.line(), e.column()), e))?;
    let images: HashMap<i64, &TaoImage> = doc.images.iter().map(|i| (i.id, i)).collect();
    let mut last_frame: HashMap<i64, i64> = HashMap::new();
    let mut dims: HashMap<i64, (u32, u32)> = HashMap::new();
    for img in &doc.images {
        let e = last_frame.entry(img.video_id).or_insert(img.frame_index);
        *e = (*e).max(img.frame_index);
        if let (Some(w), Some(h)) = (img.width, img.height) {
            dims.entry(img.video_id).or_insert((w, h));
        }
    }

    let videos = doc
        .videos
        .iter()
        .map(|v| {
            let (iw, ih) = dims.get(&v.id).copied().unwrap_or((1, 1));
            let fps = v.fps.unwrap_or(30.0);
            VideoMeta {
                id: v.id,
                name: v.name.clone().unwrap_or_else(|| format!("video_{}", v.id)),
                width: v.width.unwrap_or(iw),
                height: v.height.unwrap_or(ih),
                frame_count: v
                    .frame_count
                    .unwrap_or(0)
                    .max(last_frame.get(&v.id).map_or(1, |f| *f as u32 + 1)),
                fps,
                ann_fps: v.ann_fps.unwrap_or(fps).min(fps),
            }
        })
        .collect();

    let mut annotations = Vec::with_capacity(doc.annotations.len());
    let mut dropped = 0;
    for (i, a) in doc.annotations.iter().enumerate() {
        let img = images.get(&a.image_id).ok_or_else(|| Error::DanglingReference {
            location: format!("annotations[{i}]"),
            kind: "image",
            id: a.image_id,
        })?;
        let bbox = match a.bbox {
            None => None,
            Some(b) => match BBox::try_from(b) {
                Ok(b) => Some(b),
                Err(_) => {
                    dropped += 1;
                    continue;
                }
            },
        };
        annotations.push(GtAnnotation {
            video_id: img.video_id,
            frame_index: img.frame_index,
            track_id: a.track_id,
            category_id: a.category_id,
            bbox,
        });
    }

    let set = AnnotationSet {
        videos,
        categories: doc
            .categories
            .into_iter()
            .map(|c| Category { id: c.id, name: c.name, split: c.split.unwrap_or_default() })
            .collect(),
        annotations,
    };
    set.validate()?;
    Ok(Conversion { set, dropped })
}
