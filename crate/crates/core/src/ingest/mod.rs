//! Conversion of source annotation formats into the unified layout, category
//! merging and occlusion normalization.

mod cocovid;
mod imagenet_vid;
mod motchallenge;
mod synonyms;
mod tao;

use std::collections::{BTreeMap, HashMap};

pub use cocovid::convert_cocovid;
pub use imagenet_vid::{convert_imagenet_vid, VidFrame, VidObject, VidSnippet};
pub use motchallenge::{convert_motchallenge, parse_seqinfo};
pub use synonyms::{Resolved, SemanticConstraint, SynonymMap};
pub use tao::convert_tao;

use crate::annotation::{AnnotationSet, Category, GtAnnotation};
use crate::error::{Error, Result};

/// Converter output: the unified set and the number of source boxes that
/// were deliberately dropped (ignored regions, excluded categories,
/// rejected records).
#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub set: AnnotationSet,
    pub dropped: usize,
}

/// Source category ids resolved to merged output categories.
struct CategoryTable {
    categories: Vec<Category>,
    /// Source id to output id; `None` for excluded categories.
    mapping: HashMap<i64, Option<i64>>,
}

impl CategoryTable {
    /// Strict when `source` is given: every name must resolve. Without a
    /// source, unmapped names are kept as they are.
    fn build<'a>(
        sources: impl Iterator<Item = (i64, &'a str)>,
        synonyms: &SynonymMap,
        source: Option<&str>,
    ) -> Result<Self> {
        let mut categories: Vec<Category> = Vec::new();
        let mut by_name: HashMap<String, i64> = HashMap::new();
        let mut mapping = HashMap::new();
        let mut unmapped = Vec::new();
        for (id, name) in sources {
            let canonical = match synonyms.resolve(name, source)? {
                Resolved::Canonical(c) => c,
                Resolved::Excluded => {
                    mapping.insert(id, None);
                    continue;
                }
                Resolved::Unmapped if source.is_some() => {
                    unmapped.push(name.to_string());
                    continue;
                }
                Resolved::Unmapped => name.to_string(),
            };
            let out = *by_name.entry(canonical.clone()).or_insert_with(|| {
                categories.push(Category { id, name: canonical, split: Default::default() });
                id
            });
            mapping.insert(id, Some(out));
        }
        if !unmapped.is_empty() {
            unmapped.sort();
            unmapped.dedup();
            return Err(Error::UnmappedCategory(unmapped));
        }
        Ok(CategoryTable { categories, mapping })
    }

    fn renumbered_by_name(mut self) -> Self {
        self.categories.sort_by(|a, b| a.name.cmp(&b.name));
        let renumber: HashMap<i64, i64> = self
            .categories
            .iter_mut()
            .enumerate()
            .map(|(i, c)| {
                let old = c.id;
                c.id = i as i64 + 1;
                (old, c.id)
            })
            .collect();
        for v in self.mapping.values_mut() {
            *v = v.map(|old| renumber[&old]);
        }
        self
    }

    fn map_id(&self, source_id: i64, location: &str) -> Result<Option<i64>> {
        self.mapping
            .get(&source_id)
            .copied()
            .ok_or_else(|| Error::DanglingReference {
                location: location.to_string(),
                kind: "category",
                id: source_id,
            })
    }
}

/// Renames categories through `synonyms` and collapses categories that end
/// up with the same canonical name onto the first one's id. Names the map
/// does not mention are kept. Fails if a track would carry two categories.
pub fn merge_categories(a: &AnnotationSet, synonyms: &SynonymMap) -> Result<AnnotationSet> {
    let table = CategoryTable::build(
        a.categories.iter().map(|c| (c.id, c.name.as_str())),
        synonyms,
        None,
    )?;
    let split_of: HashMap<i64, _> = a.categories.iter().map(|c| (c.id, c.split)).collect();
    let name_of: HashMap<i64, &str> = table.categories.iter().map(|c| (c.id, c.name.as_str())).collect();

    let mut track_category: HashMap<(i64, i64), i64> = HashMap::new();
    let mut annotations = Vec::with_capacity(a.annotations.len());
    for (i, ann) in a.annotations.iter().enumerate() {
        let Some(category_id) = table.map_id(ann.category_id, &format!("annotations[{i}]"))? else {
            continue;
        };
        let first = *track_category.entry((ann.video_id, ann.track_id)).or_insert(category_id);
        if first != category_id {
            return Err(Error::CategoryConflict {
                video_id: ann.video_id,
                track_id: ann.track_id,
                first: name_of[&first].to_string(),
                second: name_of[&category_id].to_string(),
            });
        }
        annotations.push(GtAnnotation { category_id, ..ann.clone() });
    }

    let categories = table
        .categories
        .into_iter()
        .map(|c| Category { split: split_of.get(&c.id).copied().unwrap_or_default(), ..c })
        .collect();
    let out = AnnotationSet {
        videos: a.videos.clone(),
        categories,
        annotations,
    };
    out.validate()?;
    Ok(out)
}

/// Fills every interior gap of each track with explicit null-box records,
/// stepping by the video's annotation stride. Added records are appended
/// after the originals, ordered by track and frame.
pub fn normalize_occlusions(a: &AnnotationSet) -> AnnotationSet {
    let strides: HashMap<i64, i64> = a
        .videos
        .iter()
        .map(|v| (v.id, v.annotation_stride() as i64))
        .collect();
    let mut by_track: BTreeMap<(i64, i64), Vec<&GtAnnotation>> = BTreeMap::new();
    for ann in &a.annotations {
        by_track.entry((ann.video_id, ann.track_id)).or_default().push(ann);
    }
    let mut filled = Vec::new();
    for ((video_id, track_id), mut recs) in by_track {
        recs.sort_by_key(|r| r.frame_index);
        let stride = strides.get(&video_id).copied().unwrap_or(1);
        let first = recs[0].frame_index;
        let last = recs[recs.len() - 1].frame_index;
        let present: std::collections::HashSet<i64> = recs.iter().map(|r| r.frame_index).collect();
        let mut f = first + stride;
        while f < last {
            if !present.contains(&f) {
                filled.push(GtAnnotation {
                    video_id,
                    frame_index: f,
                    track_id,
                    category_id: recs[0].category_id,
                    bbox: None,
                });
            }
            f += stride;
        }
    }
    let mut out = a.clone();
    out.annotations.extend(filled);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Split, VideoMeta};
    use crate::geometry::BBox;

    fn set_with(frames: &[(i64, i64, i64)]) -> AnnotationSet {
        AnnotationSet {
            videos: vec![VideoMeta { id: 1, name: "v".into(), width: 100, height: 100, frame_count: 20, fps: 10.0, ann_fps: 10.0 }],
            categories: vec![
                Category { id: 1, name: "couch".into(), split: Split::Base },
                Category { id: 2, name: "sofa".into(), split: Split::Novel },
                Category { id: 3, name: "cat".into(), split: Split::Base },
            ],
            annotations: frames
                .iter()
                .map(|&(track, frame, cat)| GtAnnotation {
                    video_id: 1,
                    frame_index: frame,
                    track_id: track,
                    category_id: cat,
                    bbox: Some(BBox::new(frame as f64, 0.0, 5.0, 5.0).unwrap()),
                })
                .collect(),
        }
    }

    #[test]
    fn gap_filling() {
        let a = set_with(&[(1, 0, 3), (1, 1, 3), (1, 4, 3)]);
        let n = normalize_occlusions(&a);
        let nulls: Vec<i64> = n.annotations.iter().filter(|r| r.bbox.is_none()).map(|r| r.frame_index).collect();
        assert_eq!(nulls, vec![2, 3]);
        assert_eq!(&n.annotations[..3], &a.annotations[..]);
        assert_eq!(normalize_occlusions(&n), n);
        n.validate().unwrap();
    }

    #[test]
    fn gapless_and_single_unchanged() {
        let a = set_with(&[(1, 0, 3), (1, 1, 3), (2, 7, 3)]);
        assert_eq!(normalize_occlusions(&a), a);
    }

    #[test]
    fn stride_aware_gaps() {
        let mut a = set_with(&[(1, 0, 3), (1, 2, 3), (1, 8, 3)]);
        a.videos[0].ann_fps = 5.0;
        let nulls: Vec<i64> = normalize_occlusions(&a)
            .annotations
            .iter()
            .filter(|r| r.bbox.is_none())
            .map(|r| r.frame_index)
            .collect();
        assert_eq!(nulls, vec![4, 6]);
    }

    #[test]
    fn merge_identity_and_synonyms() {
        let a = set_with(&[(1, 0, 1), (2, 0, 2), (3, 0, 3)]);
        assert_eq!(merge_categories(&a, &SynonymMap::default()).unwrap(), a);

        let map = SynonymMap::parse(br#"{"couch": ["sofa", "couch"]}"#).unwrap();
        let m = merge_categories(&a, &map).unwrap();
        assert_eq!(m.categories.len(), 2);
        assert!(m.annotations.iter().filter(|r| r.track_id != 3).all(|r| r.category_id == 1));
        assert_eq!(merge_categories(&m, &map).unwrap(), m);
    }

    #[test]
    fn merge_unifies_or_rejects_split_tracks() {
        // Track 1 labelled couch then sofa: one canonical, so the merge fixes it.
        let a = set_with(&[(1, 0, 1), (1, 1, 2)]);
        assert!(a.validate().is_err());
        let map = SynonymMap::parse(br#"{"couch": ["sofa"]}"#).unwrap();
        merge_categories(&a, &map).unwrap().validate().unwrap();

        // Track 1 labelled couch then cat: two canonicals, rejected.
        let b = set_with(&[(1, 0, 1), (1, 1, 3)]);
        let err = merge_categories(&b, &map).unwrap_err();
        assert!(matches!(err, Error::CategoryConflict { track_id: 1, .. }), "{err}");
    }

    #[test]
    fn excluded_categories_dropped() {
        let a = set_with(&[(1, 0, 1), (3, 0, 3)]);
        let map = SynonymMap::parse(br#"{"exclude": ["cat"]}"#).unwrap();
        let m = merge_categories(&a, &map).unwrap();
        assert_eq!(m.annotations.len(), 1);
        assert!(m.categories.iter().all(|c| c.name != "cat"));
    }
}
