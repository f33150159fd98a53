//! Orthogonal vanishing-point detection and metric rectification of planar
//! objects whose line structure follows two orthogonal directions.
//!
//! The usual flow is [`vp_detect::detect`] on a list of image segments,
//! followed by [`rectify::rectify_pair`] to obtain the rectifying homography.
//! [`metrics::evaluate`] scores a homography against a known quadrangle and
//! [`synth::generate`] builds test scenes with ground truth.

pub mod consistency;
pub mod geom;
pub mod metrics;
pub mod optimize;
pub mod rectify;
pub mod synth;
pub mod vp_detect;

pub use consistency::{consistency, robust_cost, RobustThreshold, ScatterMatrix};
pub use geom::{apply_homography, line_intersection, CameraIntrinsics, Mat3, Point2, Quadrangle, Segment, Vec3};
pub use metrics::{evaluate, EvalReport};
pub use optimize::{minimize, OptimizerConfig};
pub use rectify::{rectification_from_vps, rectify_pair, FocalSource, Rectification};
pub use synth::{generate, GroundTruth, SceneSpec};
pub use vp_detect::{detect, DetectConfig, DetectError, ImageSize, VpCandidate, VpPair};
