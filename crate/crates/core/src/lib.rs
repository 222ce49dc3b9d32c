//! Grasp-rectangle detection pipeline: rotated-rectangle metric, Cornell
//! dataset ingestion, RGB-D preprocessing, label-preserving augmentation and
//! a dense regression head trained on frozen image features.

pub mod augment;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod features;
pub mod geometry;
pub mod pipeline;
pub mod plane;
pub mod preprocess;
pub mod regressor;
pub mod render;

pub use error::{Error, ErrorKind, Result};
pub use geometry::{angle_diff, corners_to_rect, is_success, jaccard, rect_to_corners, GraspRect};
pub use preprocess::{denormalize_target, normalize_target, NetInput, NormTargetVec};
