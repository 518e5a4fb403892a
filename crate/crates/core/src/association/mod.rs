//! Tracking-by-detection association: occlusion pre-filter, appearance and
//! motion score fusion, Hungarian matching, EMA embedding update and track
//! lifecycle.

mod scores;
mod tracker;

pub use scores::{
    appearance_score_matrix, bi_softmax_matrix, cosine_matrix, fused_score_matrix, normalize,
    occlusion_prefilter, occlusion_prefilter_indices, update_embedding, AssociationMode,
};
pub use tracker::{run_tracker, ActiveTrack, TrackRecord, TrackResult, TrackerConfig, TrackerState};
