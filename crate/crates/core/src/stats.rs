//! Dataset statistics and attribute taxonomies over an [`AnnotationSet`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, GtAnnotation, VideoMeta};
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        values
            .fold(None, |acc: Option<Range>, v| {
                Some(match acc {
                    None => Range { min: v, max: v },
                    Some(r) => Range { min: r.min.min(v), max: r.max.max(v) },
                })
            })
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n_classes: usize,
    pub n_videos: usize,
    pub n_tracks: usize,
    /// Present (non-null) boxes only.
    pub n_boxes: usize,
    /// Distinct (video, frame) pairs holding at least one record.
    pub n_frames: usize,
    /// Video height in pixels.
    pub resolution_range: Range,
    pub duration_range: Range,
    /// Visible boxes per annotated frame.
    pub objects_per_frame_range: Range,
    pub ann_fps_range: Range,
}

pub fn dataset_summary(a: &AnnotationSet) -> SummaryStats {
    let mut per_frame: HashMap<(i64, i64), usize> = HashMap::new();
    let mut tracks = BTreeSet::new();
    let mut n_boxes = 0;
    for ann in &a.annotations {
        let slot = per_frame.entry((ann.video_id, ann.frame_index)).or_default();
        if ann.bbox.is_some() {
            *slot += 1;
            n_boxes += 1;
        }
        tracks.insert(ann.track_id);
    }
    SummaryStats {
        n_classes: a.categories.len(),
        n_videos: a.videos.len(),
        n_tracks: tracks.len(),
        n_boxes,
        n_frames: per_frame.len(),
        resolution_range: Range::of(a.videos.iter().map(|v| v.height as f64)),
        duration_range: Range::of(a.videos.iter().map(VideoMeta::duration_secs)),
        objects_per_frame_range: Range::of(per_frame.values().map(|&n| n as f64)),
        ann_fps_range: Range::of(a.videos.iter().map(|v| v.ann_fps)),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeFlags {
    pub occluded_track: bool,
    pub fast_motion: bool,
    pub out_of_view: bool,
    pub shape_change: bool,
}

/// Attribute flags for one track. `track` holds the track's records; order
/// does not matter.
///
/// - occluded: a null-box record between the first and last visible frames;
/// - fast motion: the center moves more than width / 25 between consecutive
///   records that both carry a box;
/// - out of view: some box leaves `[0, width] x [0, height]`;
/// - shape change: relative aspect change above 1/5 between such records.
pub fn compute_track_attributes(track: &[&GtAnnotation], meta: &VideoMeta) -> AttributeFlags {
    let mut recs: Vec<&GtAnnotation> = track.to_vec();
    recs.sort_by_key(|a| a.frame_index);
    let visible: Vec<i64> = recs.iter().filter(|a| a.bbox.is_some()).map(|a| a.frame_index).collect();
    let (first, last) = match (visible.first(), visible.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return AttributeFlags::default(),
    };
    let occluded_track = recs
        .iter()
        .any(|a| a.bbox.is_none() && a.frame_index > first && a.frame_index < last);

    let (w, h) = (meta.width as f64, meta.height as f64);
    let out_of_view = recs
        .iter()
        .filter_map(|a| a.bbox)
        .any(|b| b.x < 0.0 || b.y < 0.0 || b.right() > w || b.bottom() > h);

    let mut fast_motion = false;
    let mut shape_change = false;
    for pair in recs.windows(2) {
        if let (Some(p), Some(q)) = (pair[0].bbox, pair[1].bbox) {
            let (px, py) = p.center();
            let (qx, qy) = q.center();
            if ((qx - px).powi(2) + (qy - py).powi(2)).sqrt() > w / 25.0 {
                fast_motion = true;
            }
            if (q.aspect() - p.aspect()).abs() / p.aspect() > 0.2 {
                shape_change = true;
            }
        }
    }
    AttributeFlags {
        occluded_track,
        fast_motion,
        out_of_view,
        shape_change,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SizeClass {
    Large,
    Medium,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ShapeClass {
    Complex,
    Intermediate,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LengthClass {
    Long,
    Medium,
    Short,
}

/// Size by image-area fraction (1/2, 1/10) and shape by aspect ratio
/// (5, 2, 1/2, 1/5). A value exactly on a boundary goes to the larger or
/// more extreme class.
pub fn classify_object(b: &BBox, meta: &VideoMeta) -> (SizeClass, ShapeClass) {
    let fraction = b.area() / (meta.width as f64 * meta.height as f64);
    let size = if fraction >= 0.5 {
        SizeClass::Large
    } else if fraction >= 0.1 {
        SizeClass::Medium
    } else {
        SizeClass::Small
    };
    let ar = b.aspect();
    let shape = if ar >= 5.0 || ar <= 0.2 {
        ShapeClass::Complex
    } else if ar >= 2.0 || ar <= 0.5 {
        ShapeClass::Intermediate
    } else {
        ShapeClass::Normal
    };
    (size, shape)
}

/// Length by annotated span over video length (4/5, 1/5).
pub fn classify_track_length(track: &[&GtAnnotation], meta: &VideoMeta) -> LengthClass {
    let frames = track.iter().map(|a| a.frame_index);
    let span = match (frames.clone().min(), frames.max()) {
        (Some(lo), Some(hi)) => (hi - lo + 1) as f64,
        _ => 0.0,
    };
    let fraction = span / meta.frame_count as f64;
    if fraction >= 0.8 {
        LengthClass::Long
    } else if fraction >= 0.2 {
        LengthClass::Medium
    } else {
        LengthClass::Short
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<String, usize>,
    pub fractions: BTreeMap<String, f64>,
}

impl Histogram {
    fn from_counts(counts: BTreeMap<String, usize>) -> Self {
        let total: usize = counts.values().sum();
        let fractions = counts
            .iter()
            .map(|(k, &v)| (k.clone(), if total == 0 { 0.0 } else { v as f64 / total as f64 }))
            .collect();
        Histogram { counts, fractions }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,count,fraction\n");
        for (k, c) in &self.counts {
            out.push_str(&format!("{k},{c},{}\n", self.fractions[k]));
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeTally {
    pub occluded_track: usize,
    pub fast_motion: usize,
    pub out_of_view: usize,
    pub shape_change: usize,
}

impl AttributeTally {
    fn add(&mut self, f: &AttributeFlags) {
        self.occluded_track += f.occluded_track as usize;
        self.fast_motion += f.fast_motion as usize;
        self.out_of_view += f.out_of_view as usize;
        self.shape_change += f.shape_change as usize;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub summary: SummaryStats,
    /// Tracks carrying each attribute.
    pub track_attributes: AttributeTally,
    /// Videos with at least one track carrying each attribute.
    pub video_attributes: AttributeTally,
    pub object_size: Histogram,
    pub object_shape: Histogram,
    pub track_length: Histogram,
}

fn label<T: std::fmt::Debug>(v: T) -> String {
    format!("{v:?}")
}

pub fn stats_report(a: &AnnotationSet) -> StatsReport {
    let videos: HashMap<i64, &VideoMeta> = a.videos.iter().map(|v| (v.id, v)).collect();
    let mut size = BTreeMap::new();
    let mut shape = BTreeMap::new();
    let mut length = BTreeMap::new();
    for c in [SizeClass::Large, SizeClass::Medium, SizeClass::Small] {
        size.insert(label(c), 0);
    }
    for c in [ShapeClass::Complex, ShapeClass::Intermediate, ShapeClass::Normal] {
        shape.insert(label(c), 0);
    }
    for c in [LengthClass::Long, LengthClass::Medium, LengthClass::Short] {
        length.insert(label(c), 0);
    }

    for ann in &a.annotations {
        if let (Some(b), Some(meta)) = (ann.bbox, videos.get(&ann.video_id)) {
            let (s, sh) = classify_object(&b, meta);
            *size.get_mut(&label(s)).unwrap() += 1;
            *shape.get_mut(&label(sh)).unwrap() += 1;
        }
    }

    let mut track_attributes = AttributeTally::default();
    let mut per_video: BTreeMap<i64, AttributeFlags> = BTreeMap::new();
    for recs in a.tracks().values() {
        let Some(meta) = videos.get(&recs[0].video_id) else { continue };
        if recs.iter().all(|r| r.bbox.is_none()) {
            continue;
        }
        let flags = compute_track_attributes(recs, meta);
        track_attributes.add(&flags);
        let v = per_video.entry(meta.id).or_default();
        v.occluded_track |= flags.occluded_track;
        v.fast_motion |= flags.fast_motion;
        v.out_of_view |= flags.out_of_view;
        v.shape_change |= flags.shape_change;
        *length.get_mut(&label(classify_track_length(recs, meta))).unwrap() += 1;
    }
    let mut video_attributes = AttributeTally::default();
    for f in per_video.values() {
        video_attributes.add(f);
    }

    StatsReport {
        summary: dataset_summary(a),
        track_attributes,
        video_attributes,
        object_size: Histogram::from_counts(size),
        object_shape: Histogram::from_counts(shape),
        track_length: Histogram::from_counts(length),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Category, Split};

    fn meta(width: u32, height: u32, frames: u32) -> VideoMeta {
        VideoMeta { id: 1, name: "v".into(), width, height, frame_count: frames, fps: 10.0, ann_fps: 5.0 }
    }

    fn rec(frame: i64, b: Option<(f64, f64, f64, f64)>) -> GtAnnotation {
        GtAnnotation {
            video_id: 1,
            frame_index: frame,
            track_id: 1,
            category_id: 0,
            bbox: b.map(|(x, y, w, h)| BBox::new(x, y, w, h).unwrap()),
        }
    }

    #[test]
    fn empty_summary() {
        let s = dataset_summary(&AnnotationSet::default());
        assert_eq!(s, SummaryStats::default());
    }

    #[test]
    fn fixture_summary() {
        // 2 videos, 3 categories, 4 tracks, 10 boxes plus one null record.
        let videos = vec![
            VideoMeta { id: 1, name: "a".into(), width: 640, height: 360, frame_count: 20, fps: 10.0, ann_fps: 5.0 },
            VideoMeta { id: 2, name: "b".into(), width: 1920, height: 1080, frame_count: 300, fps: 30.0, ann_fps: 30.0 },
        ];
        let categories = (0..3).map(|i| Category { id: i, name: format!("c{i}"), split: Split::Novel }).collect();
        let b = Some(BBox::new(1.0, 1.0, 5.0, 5.0).unwrap());
        let mut annotations = Vec::new();
        let layout: [(i64, i64, i64, &[i64]); 4] =
            [(1, 1, 0, &[0, 1, 2]), (1, 2, 1, &[0, 1]), (2, 3, 2, &[0, 1, 2]), (2, 4, 2, &[5, 6])];
        for (video, track, cat, frames) in layout {
            for &f in frames {
                annotations.push(GtAnnotation { video_id: video, frame_index: f, track_id: track, category_id: cat, bbox: b });
            }
        }
        annotations.push(GtAnnotation { video_id: 2, frame_index: 3, track_id: 3, category_id: 2, bbox: None });
        let set = AnnotationSet { videos, categories, annotations };
        let summary = set.validate().unwrap();
        let s = dataset_summary(&set);
        assert_eq!((s.n_classes, s.n_videos, s.n_tracks, s.n_boxes), (3, 2, 4, 10));
        assert_eq!((summary.n_tracks, summary.n_boxes), (s.n_tracks, s.n_boxes));
        assert_eq!(s.resolution_range, Range { min: 360.0, max: 1080.0 });
        assert_eq!(s.duration_range, Range { min: 2.0, max: 10.0 });
        assert_eq!(s.objects_per_frame_range, Range { min: 0.0, max: 2.0 });
        assert_eq!(s.ann_fps_range, Range { min: 5.0, max: 30.0 });
        assert_eq!(s.n_frames, 9);
    }

    #[test]
    fn static_track_has_no_attributes() {
        let m = meta(1000, 500, 10);
        let t: Vec<GtAnnotation> = (0..5).map(|f| rec(f, Some((100.0, 100.0, 50.0, 50.0)))).collect();
        assert_eq!(compute_track_attributes(&t.iter().collect::<Vec<_>>(), &m), AttributeFlags::default());
    }

    #[test]
    fn fast_motion_threshold() {
        let m = meta(1000, 500, 10);
        let t = [rec(0, Some((75.0, 100.0, 50.0, 50.0))), rec(1, Some((125.0, 100.0, 50.0, 50.0)))];
        let f = compute_track_attributes(&t.iter().collect::<Vec<_>>(), &m);
        assert!(f.fast_motion);
        let slow = [rec(0, Some((75.0, 100.0, 50.0, 50.0))), rec(1, Some((110.0, 100.0, 50.0, 50.0)))];
        assert!(!compute_track_attributes(&slow.iter().collect::<Vec<_>>(), &m).fast_motion);
    }

    #[test]
    fn out_of_view_and_occlusion_and_shape() {
        let m = meta(1000, 500, 10);
        let t = [rec(0, Some((-5.0, 10.0, 20.0, 20.0)))];
        assert!(compute_track_attributes(&t.iter().collect::<Vec<_>>(), &m).out_of_view);

        let gap = [rec(0, Some((0.0, 0.0, 20.0, 20.0))), rec(1, None), rec(2, Some((0.0, 0.0, 20.0, 20.0)))];
        assert!(compute_track_attributes(&gap.iter().collect::<Vec<_>>(), &m).occluded_track);
        let trailing = [rec(0, Some((0.0, 0.0, 20.0, 20.0))), rec(1, None)];
        assert!(!compute_track_attributes(&trailing.iter().collect::<Vec<_>>(), &m).occluded_track);

        let stretch = [rec(0, Some((0.0, 0.0, 20.0, 20.0))), rec(1, Some((0.0, 0.0, 25.0, 20.0)))];
        assert!(compute_track_attributes(&stretch.iter().collect::<Vec<_>>(), &m).shape_change);
    }

    #[test]
    fn classes() {
        let m = meta(100, 100, 10);
        let large = BBox::new(0.0, 0.0, 60.0, 100.0).unwrap();
        assert_eq!(classify_object(&large, &m).0, SizeClass::Large);
        let half = BBox::new(0.0, 0.0, 50.0, 100.0).unwrap();
        assert_eq!(classify_object(&half, &m).0, SizeClass::Large);
        let square = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        assert_eq!(classify_object(&square, &m), (SizeClass::Small, ShapeClass::Normal));
        let wide = BBox::new(0.0, 0.0, 50.0, 10.0).unwrap();
        assert_eq!(classify_object(&wide, &m).1, ShapeClass::Complex);
        let tall = BBox::new(0.0, 0.0, 10.0, 30.0).unwrap();
        assert_eq!(classify_object(&tall, &m).1, ShapeClass::Intermediate);

        let track: Vec<GtAnnotation> = (0..9).map(|f| rec(f, Some((0.0, 0.0, 5.0, 5.0)))).collect();
        assert_eq!(classify_track_length(&track.iter().collect::<Vec<_>>(), &m), LengthClass::Long);
        let short = [rec(3, Some((0.0, 0.0, 5.0, 5.0)))];
        assert_eq!(classify_track_length(&short.iter().collect::<Vec<_>>(), &m), LengthClass::Short);
    }
}
