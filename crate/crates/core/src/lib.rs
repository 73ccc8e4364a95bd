//! Toolkit for referring multi-object tracking: predicting and tracking every
//! object in a video that matches a natural-language expression.
//!
//! - [`geometry`]: boxes, IoU/GIoU, normalized coordinates
//! - [`data_model`]: annotation JSON, prediction CSV, dataset statistics
//! - [`annotator`]: two-click referent labeling by identity propagation
//! - [`assignment`]: exact Hungarian assignment with deterministic ties
//! - [`losses`]: focal, box, track, detect and total set-matching losses
//! - [`fusion`]: early vision-language fusion kernel and gradient tools
//! - [`lifecycle`]: track/detect query bookkeeping and baseline trackers
//! - [`hota`]: HOTA evaluation where non-referent predictions are false positives
//! - [`synthetic`]: seeded fixtures and output corruptions
//! - [`refer_kitti`]: converter from Refer-KITTI style labels

pub mod annotator;
pub mod assignment;
pub mod data_model;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod hota;
pub mod lifecycle;
pub mod losses;
pub mod refer_kitti;
pub mod synthetic;

pub use error::{AnnotateError, AssignError, DataError, EvalError, FusionError, GeometryError, LossError, TrackError};
pub use geometry::{BBox, NormBox};
