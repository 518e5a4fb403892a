use crate::annotation::{AnnotationSet, Category, GtAnnotation, VideoMeta};
use crate::error::{Error, Result};
use crate::geometry::BBox;

use super::Conversion;

/// Reads MOTChallenge rows `frame,id,x,y,w,h,conf,...` (1-based frames).
/// Rows with `conf == 0` mark ignored regions and are dropped; columns past
/// the seventh are ignored. A missing conf column counts as 1.
pub fn convert_motchallenge(
    text: &[u8],
    seq_info: VideoMeta,
    category: Category,
) -> Result<Conversion> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text);
    let mut annotations = Vec::new();
    let mut dropped = 0;
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::malformed(format!("line {line}"), e)
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let loc = || format!("line {line}");
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() < 6 {
            return Err(Error::malformed(loc(), format!("expected at least 6 columns, found {}", row.len())));
        }
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|_| Error::malformed(loc(), format!("column {} is not a number: {:?}", i + 1, &row[i])))
        };
        let frame = num(0)?;
        let track = num(1)?;
        let conf = if row.len() > 6 { num(6)? } else { 1.0 };
        if conf == 0.0 {
            dropped += 1;
            continue;
        }
        if frame.fract() != 0.0 || track.fract() != 0.0 || frame < 1.0 {
            return Err(Error::malformed(loc(), "frame and id must be integers, frame >= 1"));
        }
        let bbox = BBox::new(num(2)?, num(3)?, num(4)?, num(5)?)
            .map_err(|e| Error::malformed(loc(), e))?;
        annotations.push(GtAnnotation {
            video_id: seq_info.id,
            frame_index: frame as i64 - 1,
            track_id: track as i64,
            category_id: category.id,
            bbox: Some(bbox),
        });
    }
    let set = AnnotationSet {
        videos: vec![seq_info],
        categories: vec![category],
        annotations,
    };
    set.validate()?;
    Ok(Conversion { set, dropped })
}

/// Reads a MOTChallenge `seqinfo.ini` into video metadata.
pub fn parse_seqinfo(text: &str, video_id: i64) -> Result<VideoMeta> {
    let mut get = std::collections::HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('[') || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            get.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let field = |k: &str| -> Result<&String> {
        get.get(k).ok_or_else(|| Error::malformed("seqinfo", format!("missing key {k}")))
    };
    let number = |k: &str| -> Result<f64> {
        field(k)?
            .parse()
            .map_err(|_| Error::malformed("seqinfo", format!("{k} is not a number")))
    };
    let fps = number("framerate")?;
    Ok(VideoMeta {
        id: video_id,
        name: field("name")?.clone(),
        width: number("imwidth")? as u32,
        height: number("imheight")? as u32,
        frame_count: number("seqlength")? as u32,
        fps,
        ann_fps: fps,
    })
}
