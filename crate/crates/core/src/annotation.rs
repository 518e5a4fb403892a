//! Ground-truth annotations in the unified TAO-style layout: videos,
//! categories and one record per (video, frame, track). A record whose box
//! is `null` marks a frame where the object is completely occluded; the
//! track keeps its id across such gaps.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Base,
    #[default]
    Novel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: i64,
    pub name: String,
    /// Absent in plain TAO files; such categories count as novel until a
    /// base-class list is applied.
    #[serde(default)]
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: i64,
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub fps: f64,
    pub ann_fps: f64,
}

impl VideoMeta {
    pub fn duration_secs(&self) -> f64 {
        self.frame_count as f64 / self.fps
    }

    /// Frames that carry annotations: every `round(fps / ann_fps)`-th frame
    /// starting at 0.
    pub fn annotation_stride(&self) -> u32 {
        if self.ann_fps <= 0.0 || self.ann_fps >= self.fps {
            1
        } else {
            ((self.fps / self.ann_fps).round() as u32).max(1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtAnnotation {
    pub video_id: i64,
    pub frame_index: i64,
    pub track_id: i64,
    pub category_id: i64,
    #[serde(default)]
    pub bbox: Option<BBox>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub videos: Vec<VideoMeta>,
    pub categories: Vec<Category>,
    pub annotations: Vec<GtAnnotation>,
}

/// Counts gathered while validating a set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub n_videos: usize,
    pub n_categories: usize,
    pub n_tracks: usize,
    pub n_annotations: usize,
    pub n_boxes: usize,
    pub n_null_boxes: usize,
    pub n_base: usize,
    pub n_novel: usize,
}

/// Parses and validates an annotation document.
pub fn parse_annotations(document: &[u8]) -> Result<AnnotationSet> {
    let set: AnnotationSet = serde_json::from_slice(document).map_err(|e| {
        Error::malformed(format!("line {} column {}", e.line(), e.column()), e)
    })?;
    set.validate()?;
    Ok(set)
}

pub fn serialize_annotations(set: &AnnotationSet) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec_pretty(set)?)
}

impl AnnotationSet {
    pub fn validate(&self) -> Result<ValidationSummary> {
        let mut videos = HashMap::with_capacity(self.videos.len());
        for (i, v) in self.videos.iter().enumerate() {
            let loc = format!("videos[{i}]");
            if videos.insert(v.id, v).is_some() {
                return Err(Error::Duplicate {
                    location: loc,
                    what: format!("video id {}", v.id),
                });
            }
            if v.width < 1 || v.height < 1 || v.frame_count < 1 {
                return Err(Error::invalid(loc, "width, height and frame_count must be >= 1"));
            }
            if !(v.fps.is_finite() && v.fps > 0.0) {
                return Err(Error::invalid(loc, format!("fps {} must be positive", v.fps)));
            }
            if !(v.ann_fps.is_finite() && v.ann_fps > 0.0 && v.ann_fps <= v.fps) {
                return Err(Error::invalid(
                    loc,
                    format!("ann_fps {} must lie in (0, fps = {}]", v.ann_fps, v.fps),
                ));
            }
        }

        let mut categories = HashMap::with_capacity(self.categories.len());
        let (mut n_base, mut n_novel) = (0, 0);
        for (i, c) in self.categories.iter().enumerate() {
            if categories.insert(c.id, c).is_some() {
                return Err(Error::Duplicate {
                    location: format!("categories[{i}]"),
                    what: format!("category id {}", c.id),
                });
            }
            match c.split {
                Split::Base => n_base += 1,
                Split::Novel => n_novel += 1,
            }
        }

        let mut seen = HashSet::with_capacity(self.annotations.len());
        let mut tracks: HashMap<i64, (i64, i64)> = HashMap::new();
        let mut n_boxes = 0;
        for (i, a) in self.annotations.iter().enumerate() {
            let loc = format!("annotations[{i}]");
            let video = videos.get(&a.video_id).ok_or_else(|| Error::DanglingReference {
                location: loc.clone(),
                kind: "video",
                id: a.video_id,
            })?;
            if !categories.contains_key(&a.category_id) {
                return Err(Error::DanglingReference {
                    location: loc,
                    kind: "category",
                    id: a.category_id,
                });
            }
            if a.frame_index < 0 || a.frame_index >= video.frame_count as i64 {
                return Err(Error::invalid(
                    loc,
                    format!(
                        "frame_index {} outside [0, {})",
                        a.frame_index, video.frame_count
                    ),
                ));
            }
            if let Some(b) = &a.bbox {
                if !b.is_valid() {
                    return Err(Error::invalid(loc, format!("invalid bbox {:?}", b.to_array())));
                }
                n_boxes += 1;
            }
            if !seen.insert((a.video_id, a.frame_index, a.track_id)) {
                return Err(Error::Duplicate {
                    location: loc,
                    what: format!(
                        "(video {}, frame {}, track {})",
                        a.video_id, a.frame_index, a.track_id
                    ),
                });
            }
            let owner = *tracks.entry(a.track_id).or_insert((a.video_id, a.category_id));
            if owner.0 != a.video_id {
                return Err(Error::invalid(
                    loc,
                    format!(
                        "track {} spans videos {} and {}",
                        a.track_id, owner.0, a.video_id
                    ),
                ));
            }
            if owner.1 != a.category_id {
                return Err(Error::invalid(
                    loc,
                    format!(
                        "track {} carries categories {} and {}",
                        a.track_id, owner.1, a.category_id
                    ),
                ));
            }
        }

        Ok(ValidationSummary {
            n_videos: self.videos.len(),
            n_categories: self.categories.len(),
            n_tracks: tracks.len(),
            n_annotations: self.annotations.len(),
            n_boxes,
            n_null_boxes: self.annotations.len() - n_boxes,
            n_base,
            n_novel,
        })
    }

    pub fn video(&self, id: i64) -> Option<&VideoMeta> {
        self.videos.iter().find(|v| v.id == id)
    }

    pub fn category(&self, id: i64) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }

    /// Records grouped by track id, each group sorted by frame.
    pub fn tracks(&self) -> BTreeMap<i64, Vec<&GtAnnotation>> {
        let mut out: BTreeMap<i64, Vec<&GtAnnotation>> = BTreeMap::new();
        for a in &self.annotations {
            out.entry(a.track_id).or_default().push(a);
        }
        for recs in out.values_mut() {
            recs.sort_by_key(|a| a.frame_index);
        }
        out
    }

    pub fn with_split(mut self, base_names: &BTreeSet<String>) -> Self {
        self.categories = split_categories(self.categories, base_names);
        self
    }
}

/// Marks every category whose name is listed as base; all others become novel.
pub fn split_categories(categories: Vec<Category>, base_names: &BTreeSet<String>) -> Vec<Category> {
    categories
        .into_iter()
        .map(|mut c| {
            c.split = if base_names.contains(&c.name) {
                Split::Base
            } else {
                Split::Novel
            };
            c
        })
        .collect()
}

/// Reads a newline-delimited list of base category names.
pub fn parse_base_names(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}
