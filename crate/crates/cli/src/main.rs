mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ovmot::association::AssociationMode;

/// Problem with what the user supplied: missing file, bad flag combination.
/// Maps to exit status 2, like errors reported by the library.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser, Debug)]
#[command(name = "ovmot", version, about = "Open-vocabulary multi-object tracking toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for per-video work; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Random seed; overrides the seed in a scenario config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory for outputs without an explicit path, and for the run manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// JSON config: tracker settings for `track`, scenario settings for `synth`.
    #[arg(long, global = true, env = "OVMOT_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceFormat {
    Motchallenge,
    Cocovid,
    #[value(alias = "imagenetvid")]
    ImagenetVid,
    Tao,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert a source annotation file to the unified format.
    Convert {
        #[arg(long, value_enum)]
        from: SourceFormat,
        /// Source annotation file (MOTChallenge gt.txt or a JSON document).
        #[arg(long)]
        input: PathBuf,
        /// MOTChallenge seqinfo.ini.
        #[arg(long)]
        seqinfo: Option<PathBuf>,
        /// Category name for MOTChallenge records.
        #[arg(long, default_value = "person")]
        category: String,
        /// Category id for MOTChallenge records.
        #[arg(long, default_value_t = 1)]
        category_id: i64,
        /// Video id for MOTChallenge sequences.
        #[arg(long, default_value_t = 1)]
        video_id: i64,
        /// Synonym map JSON; without it names pass through unchanged.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        /// Source dataset name used by synonym constraints.
        #[arg(long)]
        source_name: Option<String>,
        /// Add explicit null-box records for interior track gaps.
        #[arg(long)]
        normalize_occlusions: bool,
        /// Output path; defaults to `<out-dir>/annotations.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an annotation and/or detection file.
    Validate {
        #[arg(long)]
        ann: Option<PathBuf>,
        #[arg(long)]
        det: Option<PathBuf>,
        /// Newline-separated base category names to apply before summarizing.
        #[arg(long)]
        base_classes: Option<PathBuf>,
    },
    /// Dataset summary, attribute counts and size/shape/length histograms.
    Stats {
        #[arg(long)]
        ann: PathBuf,
    },
    /// Run the tracker over a detection file.
    Track {
        /// Detection JSONL file.
        #[arg(long)]
        det: PathBuf,
        /// Association mode: fused, appearance_only or motion_only.
        #[arg(long)]
        mode: Option<AssociationMode>,
        /// Output path; defaults to `<out-dir>/tracks.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a track result against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Newline-separated base category names; otherwise the splits in the file are used.
        #[arg(long)]
        base_classes: Option<PathBuf>,
        /// Localization IoU threshold; repeat to average over several.
        #[arg(long = "loc-iou", default_values_t = [ovmot::teta::DEFAULT_LOC_THRESHOLD])]
        loc_iou: Vec<f64>,
    },
    /// Generate a synthetic scenario with ground truth and detections.
    Synth {
        /// Output annotations; defaults to `<out-dir>/synth_annotations.json`.
        #[arg(long)]
        out_ann: Option<PathBuf>,
        /// Output detections; defaults to `<out-dir>/synth_detections.jsonl`.
        #[arg(long)]
        out_det: Option<PathBuf>,
    },
    /// Combine evaluation or stats reports into comparison tables.
    Report {
        /// Report JSON files written by `evaluate` or `stats`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Display names, one per input, comma separated; defaults to file names.
        #[arg(long, value_delimiter = ',')]
        names: Vec<String>,
    },
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let input = e
        .chain()
        .any(|c| c.is::<InputError>() || c.is::<ovmot::Error>());
    if input {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
