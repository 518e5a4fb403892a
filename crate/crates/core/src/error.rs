use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document at {location}: {message}")]
    Malformed { location: String, message: String },

    #[error("{location}: unknown {kind} id {id}")]
    DanglingReference {
        location: String,
        kind: &'static str,
        id: i64,
    },

    #[error("{location}: duplicate {what}")]
    Duplicate { location: String, what: String },

    #[error("{location}: {message}")]
    Invalid { location: String, message: String },

    #[error("line {line}: embedding has dimension {found}, expected {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: frame index {frame_index} does not follow {previous} for video {video_id}")]
    FrameOrder {
        line: usize,
        video_id: i64,
        previous: i64,
        frame_index: i64,
    },

    #[error("embedding {index} of the {side} set has zero norm")]
    ZeroNorm { side: &'static str, index: usize },

    #[error("embedding dimensions disagree: {0} vs {1}")]
    EmbeddingShape(usize, usize),

    #[error("non-finite observation: {0:?}")]
    NonFinite([f64; 4]),

    #[error("frame {frame_index} is not after the last processed frame {cursor}")]
    OutOfOrderFrame { cursor: i64, frame_index: i64 },

    #[error("prediction references video {0} which is absent from the ground truth")]
    VideoMismatch(i64),

    #[error("unmapped categories: {}", .0.join(", "))]
    UnmappedCategory(Vec<String>),

    #[error("category {name:?} maps to several canonical names ({candidates}) and no constraint disambiguates it")]
    AmbiguousSynonym { name: String, candidates: String },

    #[error("track {track_id} in video {video_id} would carry categories {first:?} and {second:?}")]
    CategoryConflict {
        video_id: i64,
        track_id: i64,
        first: String,
        second: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn malformed(location: impl Into<String>, message: impl ToString) -> Self {
        Error::Malformed {
            location: location.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn invalid(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            location: location.into(),
            message: message.into(),
        }
    }
}
