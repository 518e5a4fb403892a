use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, GtAnnotation, VideoMeta};
use crate::error::{Error, Result};
use crate::geometry::BBox;

use super::{CategoryTable, Conversion, SynonymMap};

/// One object in an ImageNet-VID frame record (corner coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VidObject {
    pub trackid: i64,
    /// WordNet id, e.g. `n02084071`.
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VidFrame {
    pub frame_index: i64,
    pub objects: Vec<VidObject>,
}

/// A snippet: video metadata plus its per-frame object records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VidSnippet {
    pub video: VideoMeta,
    pub frames: Vec<VidFrame>,
}

impl VidSnippet {
    pub fn parse(document: &[u8]) -> Result<Self> {
        serde_json::from_slice(document)
            .map_err(|e| Error::malformed(format!("line {} column {}", e.line(), e.column()), e))
    }
}

/// Converts ImageNet-VID records. Objects with `xmax <= xmin` or
/// `ymax <= ymin` are rejected and counted in `dropped`. Category ids are
/// assigned 1.. in canonical-name order.
pub fn convert_imagenet_vid(snippet: &VidSnippet, synonyms: &SynonymMap, source: &str) -> Result<Conversion> {
    let mut names: Vec<&str> = snippet
        .frames
        .iter()
        .flat_map(|f| f.objects.iter().map(|o| o.name.as_str()))
        .collect();
    names.sort_unstable();
    names.dedup();
    let table = CategoryTable::build(
        names.iter().enumerate().map(|(i, n)| (i as i64, *n)),
        synonyms,
        Some(source),
    )?
    .renumbered_by_name();
    let source_id = |name: &str| names.binary_search(&name).map(|i| i as i64).unwrap();

    let mut annotations = Vec::new();
    let mut dropped = 0;
    for frame in &snippet.frames {
        for (k, o) in frame.objects.iter().enumerate() {
            let loc = format!("frame {} object {k}", frame.frame_index);
            let Some(category_id) = table.map_id(source_id(&o.name), &loc)? else {
                dropped += 1;
                continue;
            };
            if o.xmax <= o.xmin || o.ymax <= o.ymin {
                dropped += 1;
                continue;
            }
            annotations.push(GtAnnotation {
                video_id: snippet.video.id,
                frame_index: frame.frame_index,
                track_id: o.trackid,
                category_id,
                bbox: Some(BBox::from_corners(o.xmin, o.ymin, o.xmax, o.ymax).map_err(|e| Error::malformed(loc, e))?),
            });
        }
    }
    let set = AnnotationSet {
        videos: vec![snippet.video.clone()],
        categories: table.categories,
        annotations,
    };
    set.validate()?;
    Ok(Conversion { set, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(trackid: i64, name: &str, xmin: f64, xmax: f64) -> VidObject {
        VidObject { trackid, name: name.into(), xmin, xmax, ymin: 20.0, ymax: 60.0 }
    }

    fn snippet(frames: Vec<VidFrame>) -> VidSnippet {
        VidSnippet {
            video: VideoMeta { id: 3, name: "snip".into(), width: 320, height: 240, frame_count: 10, fps: 25.0, ann_fps: 25.0 },
            frames,
        }
    }

    fn dogs() -> SynonymMap {
        SynonymMap::parse(br#"{"dog": ["n02084071"]}"#).unwrap()
    }

    #[test]
    fn corners_to_xywh() {
        let s = snippet(vec![VidFrame { frame_index: 0, objects: vec![obj(0, "n02084071", 10.0, 40.0)] }]);
        let c = convert_imagenet_vid(&s, &dogs(), "vid").unwrap();
        assert_eq!(c.set.annotations[0].bbox.unwrap().to_array(), [10.0, 20.0, 30.0, 40.0]);
        assert_eq!(c.set.categories[0].name, "dog");
    }

    #[test]
    fn shared_trackid_is_one_track() {
        let s = snippet(vec![
            VidFrame { frame_index: 0, objects: vec![obj(0, "n02084071", 10.0, 40.0)] },
            VidFrame { frame_index: 1, objects: vec![obj(0, "n02084071", 12.0, 42.0)] },
        ]);
        let c = convert_imagenet_vid(&s, &dogs(), "vid").unwrap();
        let summary = c.set.validate().unwrap();
        assert_eq!((summary.n_tracks, summary.n_boxes), (1, 2));
    }

    #[test]
    fn unmapped_wnid_named() {
        let s = snippet(vec![VidFrame { frame_index: 0, objects: vec![obj(0, "n01503061", 10.0, 40.0)] }]);
        let err = convert_imagenet_vid(&s, &dogs(), "vid").unwrap_err();
        assert!(err.to_string().contains("n01503061"));
    }

    #[test]
    fn inverted_corners_rejected() {
        let s = snippet(vec![VidFrame {
            frame_index: 0,
            objects: vec![obj(0, "n02084071", 40.0, 10.0), obj(1, "n02084071", 10.0, 40.0)],
        }]);
        let c = convert_imagenet_vid(&s, &dogs(), "vid").unwrap();
        assert_eq!((c.set.annotations.len(), c.dropped), (1, 1));
    }
}
