//! Metric rectification homography from a vanishing-point pair.
//!
//! The camera is virtually rotated so that the back-projected horizontal
//! direction becomes the new x axis and the optical axis becomes normal to the
//! object plane. If the two directions are not orthogonal (typically because
//! the focal length is only approximate), the remaining skew is undone by an
//! affine shear.

use crate::geom::{CameraIntrinsics, Mat3, Point2, Vec3};
use crate::vp_detect::{ImageSize, VpPair};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `|CX′ × CY′|` below which the two directions count as collinear.
pub const EPS_COLLINEAR: f64 = 1e-9;
/// `|CZ′_z|` below which the object plane contains the optical axis.
pub const EPS_PLANE: f64 = 1e-12;
/// `|cos β|` below which the directions are treated as exactly orthogonal.
pub const EPS_ORTHOGONAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocalSource {
    Provided,
    Estimated,
    DiagonalFallback,
}

impl std::fmt::Display for FocalSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FocalSource::Provided => "provided",
            FocalSource::Estimated => "estimated",
            FocalSource::DiagonalFallback => "diagonal-fallback",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RectifyError {
    #[error("vanishing points are identical")]
    IdenticalPoints,
    #[error("vanishing-point directions are collinear (|CX' x CY'| = {0:e})")]
    CollinearVps(f64),
    #[error("object plane contains the optical axis")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectification {
    /// Image-to-rectified-image homography `K·A·Rᵀ·K⁻¹`.
    pub h: Mat3,
    /// Rotation with columns `(CX′, CY″, CZ′)`: new camera axes expressed in
    /// the old camera frame.
    pub r: Mat3,
    /// Shear restoring the angle between the two directions.
    pub a: Mat3,
    /// Angle between the two recovered 3D directions, degrees.
    pub beta: f64,
    pub f_used: f64,
    pub f_source: FocalSource,
}

/// Builds the rectifying homography for `v_h`/`v_v` under `intrinsics`.
///
/// `v_h` maps to the ideal point of the x axis and `v_v` to the ideal point
/// of the y axis. The result is recorded with `FocalSource::Provided`; use
/// [`rectify_pair`] to carry the real provenance of the focal length.
pub fn rectification_from_vps(
    v_h: Point2,
    v_v: Point2,
    intrinsics: &CameraIntrinsics,
) -> Result<Rectification, RectifyError> {
    if v_h == v_v {
        return Err(RectifyError::IdenticalPoints);
    }
    // A vanishing point fixes a direction only up to sign; pointing the axes
    // along +x and +y keeps mildly tilted images upright.
    let mut cx = intrinsics.back_project(v_h).normalize();
    if cx.x < 0.0 {
        cx = -cx;
    }
    let mut cy = intrinsics.back_project(v_v).normalize();
    if cy.y < 0.0 {
        cy = -cy;
    }
    let mut cz = cx.cross(&cy);
    let sin_beta = cz.norm();
    if !(sin_beta >= EPS_COLLINEAR) {
        return Err(RectifyError::CollinearVps(sin_beta));
    }
    cz /= sin_beta;
    if cz.z.abs() < EPS_PLANE {
        return Err(RectifyError::Degenerate);
    }
    // Keep the new optical axis pointing forward; otherwise the result is a
    // mirror image.
    if cz.z < 0.0 {
        cy = -cy;
        cz = -cz;
    }

    let cos_beta = cx.dot(&cy);
    let (cy2, beta, a) = if cos_beta.abs() < EPS_ORTHOGONAL {
        (cy, 90.0, Mat3::identity())
    } else {
        let beta = cos_beta.clamp(-1.0, 1.0).acos().to_degrees().clamp(1.0, 179.0);
        let (s, c) = beta.to_radians().sin_cos();
        let a = Mat3::new(1.0, -c / s, 0.0, 0.0, 1.0 / s, 0.0, 0.0, 0.0, 1.0);
        (cz.cross(&cx).normalize(), beta, a)
    };

    let r = Mat3::from_columns(&[cx, cy2, cz]);
    let h = intrinsics.matrix() * a * r.transpose() * intrinsics.inverse_matrix();
    Ok(Rectification {
        h,
        r,
        a,
        beta,
        f_used: intrinsics.f,
        f_source: FocalSource::Provided,
    })
}

/// Chooses the focal length: the provided one, else the pair's estimate,
/// else the image diagonal.
pub fn focal_for_rectification(
    pair: &VpPair,
    provided: Option<f64>,
    image: ImageSize,
) -> (f64, FocalSource) {
    if let Some(f) = provided {
        (f, FocalSource::Provided)
    } else if let Some(f) = pair.f_estimated {
        (f, FocalSource::Estimated)
    } else {
        (image.diagonal(), FocalSource::DiagonalFallback)
    }
}

/// Rectification of a detected pair with the focal length picked by
/// [`focal_for_rectification`].
pub fn rectify_pair(
    pair: &VpPair,
    provided_f: Option<f64>,
    principal: Point2,
    image: ImageSize,
) -> Result<Rectification, RectifyError> {
    let (f, source) = focal_for_rectification(pair, provided_f, image);
    let k = CameraIntrinsics { f, principal };
    let mut rect = rectification_from_vps(pair.e_h, pair.e_v, &k)?;
    rect.f_source = source;
    Ok(rect)
}

/// Homogeneous image of `p` under `h`.
pub fn map_homogeneous(h: &Mat3, p: Point2) -> Vec3 {
    h * p.to_homogeneous()
}
