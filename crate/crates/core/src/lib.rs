//! Open-vocabulary multi-object tracking toolkit.
//!
//! The crate consumes precomputed detections (boxes, class scores and
//! appearance embeddings) and provides:
//!
//! - [`association`]: a tracker that fuses bi-softmax/cosine appearance
//!   scores with Kalman-predicted IoU and matches with the Hungarian method;
//! - [`teta`]: LocA / ClsA / AssA / TETA evaluation with base/novel splits;
//! - [`annotation`], [`detection`], [`ingest`]: file formats and converters;
//! - [`stats`]: dataset statistics and attribute taxonomies;
//! - [`synth`]: seeded synthetic scenarios and error injection.

pub mod annotation;
pub mod assignment;
pub mod association;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod motion;
pub mod stats;
pub mod synth;
pub mod teta;

pub use error::{Error, Result};
pub use geometry::{iou, BBox};
