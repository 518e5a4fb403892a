use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::Value;

use ovmot::annotation::{parse_annotations, parse_base_names, serialize_annotations, AnnotationSet, Category, Split};
use ovmot::association::{run_tracker, TrackResult, TrackerConfig};
use ovmot::detection::{parse_detection_file, serialize_detections};
use ovmot::ingest::{
    convert_cocovid, convert_imagenet_vid, convert_motchallenge, convert_tao, normalize_occlusions,
    parse_seqinfo, SynonymMap, VidSnippet,
};
use ovmot::stats::{stats_report, StatsReport};
use ovmot::synth::{generate_scenario, SynthConfig};
use ovmot::teta::{evaluate_video, group_by_video, reduce, SplitScores, TetaReport};

use crate::manifest::Run;
use crate::{Cli, Command, InputError, SourceFormat};

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("starting worker pool")?;
    let out_dir = cli.out_dir.clone();
    let dir_or_cwd = || out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Convert {
            from,
            input,
            seqinfo,
            category,
            category_id,
            video_id,
            synonyms,
            source_name,
            normalize_occlusions: fill,
            out,
        } => {
            let mut run = Run::new("convert");
            let synonyms = match &synonyms {
                Some(p) => SynonymMap::parse(&run.read(p)?)?,
                None => SynonymMap::default(),
            };
            let source = source_name.unwrap_or_else(|| format!("{from:?}").to_lowercase());
            run.set_config(&serde_json::json!({
                "from": format!("{from:?}").to_lowercase(),
                "source_name": source,
                "category": category,
                "category_id": category_id,
                "video_id": video_id,
                "normalize_occlusions": fill,
                "synonyms": synonyms.to_json(),
            }));
            let doc = run.read(&input)?;
            let conversion = match from {
                SourceFormat::Motchallenge => {
                    let seqinfo = seqinfo
                        .ok_or_else(|| InputError("--seqinfo is required for motchallenge input".into()))?;
                    let meta = parse_seqinfo(&run.read_string(&seqinfo)?, video_id)?;
                    let category = Category { id: category_id, name: category, split: Split::default() };
                    convert_motchallenge(&doc, meta, category)?
                }
                SourceFormat::Cocovid => convert_cocovid(&doc, &synonyms, &source)?,
                SourceFormat::ImagenetVid => convert_imagenet_vid(&VidSnippet::parse(&doc)?, &synonyms, &source)?,
                SourceFormat::Tao => convert_tao(&doc)?,
            };
            let set = if fill { normalize_occlusions(&conversion.set) } else { conversion.set };
            let out = out.unwrap_or_else(|| dir_or_cwd().join("annotations.json"));
            run.write(&out, &serialize_annotations(&set)?)?;
            println!(
                "converted {} records in {} videos to {} ({} source boxes dropped)",
                set.annotations.len(),
                set.videos.len(),
                out.display(),
                conversion.dropped
            );
            run.finish(&manifest_dir(&out_dir, &out))?;
        }

        Command::Validate { ann, det, base_classes } => {
            if ann.is_none() && det.is_none() {
                return Err(InputError("nothing to validate: pass --ann and/or --det".into()).into());
            }
            let mut run = Run::new("validate");
            if let Some(path) = &ann {
                let set = load_annotations(&mut run, path, base_classes.as_deref())?;
                let s = set.validate().with_context(|| path.display().to_string())?;
                println!("{}: valid", path.display());
                for (k, v) in [
                    ("videos", s.n_videos),
                    ("categories", s.n_categories),
                    ("base categories", s.n_base),
                    ("novel categories", s.n_novel),
                    ("tracks", s.n_tracks),
                    ("records", s.n_annotations),
                    ("boxes", s.n_boxes),
                    ("null boxes", s.n_null_boxes),
                ] {
                    println!("  {k:<17} {v}");
                }
            }
            if let Some(path) = &det {
                let seqs = parse_detection_file(&run.read(path)?, None).with_context(|| path.display().to_string())?;
                let frames: usize = seqs.iter().map(|s| s.frames.len()).sum();
                let dets: usize = seqs.iter().map(|s| s.n_detections()).sum();
                let dim = seqs.iter().find_map(|s| s.embedding_dim()).unwrap_or(0);
                println!("{}: valid", path.display());
                println!("  {:<17} {}", "videos", seqs.len());
                println!("  {:<17} {}", "frames", frames);
                println!("  {:<17} {}", "detections", dets);
                println!("  {:<17} {}", "embedding dim", dim);
            }
            if let Some(dir) = &out_dir {
                run.finish(dir)?;
            }
        }

        Command::Stats { ann } => {
            let mut run = Run::new("stats");
            let set = load_annotations(&mut run, &ann, None)?;
            set.validate().with_context(|| ann.display().to_string())?;
            let report = stats_report(&set);
            let dir = dir_or_cwd();
            run.write(&dir.join("stats.json"), &serde_json::to_vec_pretty(&report)?)?;
            write_histograms(&mut run, &dir, "", &report)?;
            print_stats(&report);
            run.finish(&dir)?;
        }

        Command::Track { det, mode, out } => {
            let mut run = Run::new("track");
            let mut cfg: TrackerConfig = match &cli.config {
                Some(p) => serde_json::from_slice(&run.read(p)?)
                    .map_err(|e| InputError(format!("tracker config {}: {e}", p.display())))?,
                None => TrackerConfig::default(),
            };
            if let Some(m) = mode {
                cfg.mode = m;
            }
            cfg.validate()?;
            run.set_config(&cfg);
            let seqs = parse_detection_file(&run.read(&det)?, None).with_context(|| det.display().to_string())?;
            let results: Vec<TrackResult> =
                pool.install(|| seqs.par_iter().map(|s| run_tracker(s, &cfg)).collect::<ovmot::Result<_>>())?;
            let mut all = TrackResult::default();
            for r in results {
                all.extend(r);
            }
            let out = out.unwrap_or_else(|| dir_or_cwd().join("tracks.json"));
            run.write(&out, &all.to_json()?)?;
            let tracks: std::collections::BTreeSet<(i64, i64)> =
                all.records.iter().map(|r| (r.video_id, r.track_id)).collect();
            println!(
                "tracked {} videos: {} tracks, {} records -> {}",
                seqs.len(),
                tracks.len(),
                all.records.len(),
                out.display()
            );
            run.finish(&manifest_dir(&out_dir, &out))?;
        }

        Command::Evaluate { gt, pred, base_classes, loc_iou } => {
            if let Some(t) = loc_iou.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
                return Err(InputError(format!("--loc-iou {t} must lie in (0, 1]")).into());
            }
            let mut run = Run::new("evaluate");
            run.set_config(&serde_json::json!({ "loc_iou": loc_iou }));
            let set = load_annotations(&mut run, &gt, base_classes.as_deref())?;
            set.validate().with_context(|| gt.display().to_string())?;
            let pred_result = TrackResult::parse(&run.read(&pred)?).with_context(|| pred.display().to_string())?;
            pred_result.validate().with_context(|| pred.display().to_string())?;
            let groups = group_by_video(&set, &pred_result)?;
            let evals = pool.install(|| {
                groups
                    .par_iter()
                    .map(|(v, g, p)| evaluate_video(v, g, p, &loc_iou))
                    .collect()
            });
            let report = reduce(&set, evals, &loc_iou);
            let dir = dir_or_cwd();
            run.write(&dir.join("teta.json"), &serde_json::to_vec_pretty(&report)?)?;
            run.write(&dir.join("teta.csv"), report.to_csv().as_bytes())?;
            let rows: Vec<(String, &SplitScores)> =
                report.splits().iter().map(|(n, s)| (n.to_string(), *s)).collect();
            print_teta_table("split", &rows);
            run.finish(&dir)?;
        }

        Command::Synth { out_ann, out_det } => {
            let mut run = Run::new("synth");
            let mut cfg: SynthConfig = match &cli.config {
                Some(p) => serde_json::from_slice(&run.read(p)?)
                    .map_err(|e| InputError(format!("scenario config {}: {e}", p.display())))?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            run.set_config(&cfg);
            let (set, det) = generate_scenario(&cfg)?;
            let out_ann = out_ann.unwrap_or_else(|| dir_or_cwd().join("synth_annotations.json"));
            let out_det = out_det.unwrap_or_else(|| dir_or_cwd().join("synth_detections.jsonl"));
            run.write(&out_ann, &serialize_annotations(&set)?)?;
            run.write(&out_det, &serialize_detections([&det])?)?;
            println!(
                "generated {} tracks over {} frames: {} ground-truth records, {} detections",
                cfg.n_tracks,
                cfg.n_frames,
                set.annotations.len(),
                det.n_detections()
            );
            run.finish(&manifest_dir(&out_dir, &out_ann))?;
        }

        Command::Report { inputs, names } => {
            if !names.is_empty() && names.len() != inputs.len() {
                return Err(InputError(format!("{} names given for {} reports", names.len(), inputs.len())).into());
            }
            let mut run = Run::new("report");
            let names = if names.is_empty() { default_names(&inputs) } else { names };
            let mut parsed = Vec::new();
            for (path, name) in inputs.iter().zip(names) {
                let value: Value = serde_json::from_slice(&run.read(path)?)
                    .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
                parsed.push((name, path, value));
            }
            let dir = dir_or_cwd();
            let kinds: Vec<ReportKind> = parsed.iter().map(|(_, p, v)| ReportKind::of(p, v)).collect::<Result<_>>()?;
            if kinds.iter().any(|k| *k != kinds[0]) {
                return Err(InputError("incompatible report schemas: cannot mix evaluation and stats reports".into()).into());
            }
            match kinds[0] {
                ReportKind::Teta => {
                    let mut reports = Vec::new();
                    for (name, path, value) in parsed {
                        let r: TetaReport = serde_json::from_value(value)
                            .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
                        reports.push((name, r));
                    }
                    reports.sort_by(|a, b| b.1.all.teta.total_cmp(&a.1.all.teta).then_with(|| a.0.cmp(&b.0)));
                    let mut csv = String::from("method,split,TETA,LocA,AssA,ClsA\n");
                    let mut rows = Vec::new();
                    for (name, r) in &reports {
                        for (split, s) in r.splits() {
                            csv.push_str(&format!("{name},{split},{},{},{},{}\n", s.teta, s.loca, s.assa, s.clsa));
                        }
                        rows.push((name.clone(), &r.all));
                    }
                    run.write(&dir.join("comparison.csv"), csv.as_bytes())?;
                    print_teta_table("method", &rows);
                    let has_splits = reports
                        .iter()
                        .any(|(_, r)| r.base.counts.iter().chain(&r.novel.counts).any(|c| c.counts.tpl + c.counts.fnl > 0));
                    if has_splits {
                        let rows: Vec<(String, &SplitScores)> = reports
                            .iter()
                            .flat_map(|(name, r)| {
                                [("Base", &r.base), ("Novel", &r.novel)].map(|(s, v)| (format!("{name} {s}"), v))
                            })
                            .collect();
                        println!();
                        print_teta_table("method split", &rows);
                    }
                }
                ReportKind::Stats => {
                    let single = parsed.len() == 1;
                    for (name, path, value) in parsed {
                        let r: StatsReport = serde_json::from_value(value)
                            .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
                        let prefix = if single { String::new() } else { format!("{name}_") };
                        write_histograms(&mut run, &dir, &prefix, &r)?;
                        println!("{name}");
                        print_stats(&r);
                    }
                }
            }
            run.finish(&dir)?;
        }
    }
    Ok(())
}

fn manifest_dir(out_dir: &Option<PathBuf>, primary: &Path) -> PathBuf {
    out_dir.clone().unwrap_or_else(|| match primary.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    })
}

fn load_annotations(run: &mut Run, path: &Path, base_classes: Option<&Path>) -> Result<AnnotationSet> {
    let set = parse_annotations(&run.read(path)?).with_context(|| path.display().to_string())?;
    Ok(match base_classes {
        Some(p) => set.with_split(&parse_base_names(&run.read_string(p)?)),
        None => set,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReportKind {
    Teta,
    Stats,
}

impl ReportKind {
    fn of(path: &Path, v: &Value) -> Result<Self> {
        let has = |k: &str| v.get(k).is_some();
        if has("all") && has("base") && has("novel") {
            Ok(ReportKind::Teta)
        } else if has("summary") && has("object_size") {
            Ok(ReportKind::Stats)
        } else {
            Err(InputError(format!("{}: not an evaluation or stats report", path.display())).into())
        }
    }
}

fn default_names(inputs: &[PathBuf]) -> Vec<String> {
    let stem = |p: &PathBuf| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stems: Vec<String> = inputs.iter().map(stem).collect();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &stems {
        *seen.entry(s).or_default() += 1;
    }
    inputs
        .iter()
        .zip(&stems)
        .map(|(p, s)| {
            if seen[s.as_str()] > 1 {
                // Reports from several runs usually share a file name; use the directory.
                match p.parent().and_then(|d| d.file_name()) {
                    Some(d) => format!("{}/{s}", d.to_string_lossy()),
                    None => p.display().to_string(),
                }
            } else {
                s.clone()
            }
        })
        .collect()
}

fn write_histograms(run: &mut Run, dir: &Path, prefix: &str, r: &StatsReport) -> Result<()> {
    for (name, h) in [
        ("object_size", &r.object_size),
        ("object_shape", &r.object_shape),
        ("track_length", &r.track_length),
    ] {
        run.write(&dir.join(format!("{prefix}{name}.csv")), h.to_csv().as_bytes())?;
    }
    Ok(())
}

fn print_teta_table(label: &str, rows: &[(String, &SplitScores)]) {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(label.len());
    println!("{label:<width$}  {:>6} {:>6} {:>6} {:>6}", "TETA", "LocA", "AssA", "ClsA");
    for (name, s) in rows {
        println!(
            "{name:<width$}  {:>6.1} {:>6.1} {:>6.1} {:>6.1}",
            s.teta, s.loca, s.assa, s.clsa
        );
    }
}

fn print_stats(r: &StatsReport) {
    let s = &r.summary;
    let range = |x: &ovmot::stats::Range| format!("{:.1} - {:.1}", x.min, x.max);
    println!("  {:<22} {}", "classes", s.n_classes);
    println!("  {:<22} {}", "videos", s.n_videos);
    println!("  {:<22} {}", "tracks", s.n_tracks);
    println!("  {:<22} {}", "boxes", s.n_boxes);
    println!("  {:<22} {}", "annotated frames", s.n_frames);
    println!("  {:<22} {}", "resolution (height)", range(&s.resolution_range));
    println!("  {:<22} {}", "duration (s)", range(&s.duration_range));
    println!("  {:<22} {}", "objects per frame", range(&s.objects_per_frame_range));
    println!("  {:<22} {}", "annotation fps", range(&s.ann_fps_range));
    let t = &r.track_attributes;
    println!(
        "  tracks: occluded {}, fast motion {}, out of view {}, shape change {}",
        t.occluded_track, t.fast_motion, t.out_of_view, t.shape_change
    );
    for (name, h) in [("size", &r.object_size), ("shape", &r.object_shape), ("length", &r.track_length)] {
        let parts: Vec<String> = h
            .fractions
            .iter()
            .map(|(k, f)| format!("{k} {:.1}%", 100.0 * f))
            .collect();
        println!("  {name:<6} {}", parts.join(", "));
    }
}
