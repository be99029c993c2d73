//! Anonymization toolkit for recorded operating-room video.
//!
//! The crate consumes per-frame face detections produced by any external
//! detector and provides:
//!
//! - [`streams`]: the line-delimited JSON format for detections and ground truth
//! - [`association`]: linking boxes across frames into tracks, and per-frame
//!   detection/truth matching
//! - [`smoother`]: sliding-window gap filling that raises recall
//! - [`evaluation`]: tp/fp/fn counting, precision/recall/F1 and threshold sweeps
//! - [`anonymizer`]: pixelation and box blur over P6 frames
//! - [`synth`]: seeded synthetic sequences with a drop log for oracle checks
//! - [`rpn`]: reference math for region proposal networks (anchors, labels,
//!   sampling, losses, NMS)
//!
//! See the `examples/` directory for one runnable program per capability.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anonymizer;
pub mod association;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod image;
pub mod rpn;
pub mod selftest;
pub mod smoother;
pub mod streams;
pub mod synth;

pub use error::{AnonymizeError, ConfigError, GeometryError, ImageError, RpnError, StreamError};
pub use geometry::BBox;
pub use streams::{Detection, DetectionStream, FrameRecord, Provenance};
