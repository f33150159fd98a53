//! Rectification quality of a known quadrangle under a homography.
//!
//! * `d_rect`: mean deviation of the four corner angles from 90°.
//! * `d_rot`: mean absolute tilt of the two mid-lines against the image axes.
//! * `d_ar`: relative deviation of the width/height ratio from the template.

use crate::geom::{apply_homography, is_simple_quad, Mat3, Point2, Quadrangle};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Degrees.
    pub d_rect: f64,
    /// Degrees.
    pub d_rot: f64,
    /// Unitless ratio; multiply by 100 for percent.
    pub d_ar: f64,
    /// The 90°-rotated side labeling was used for `d_rot`.
    pub rotated90: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MetricsError {
    #[error("a quadrangle corner maps to infinity")]
    CornerAtInfinity,
    #[error("mapped quadrangle is self-intersecting")]
    SelfIntersecting,
    #[error("aspect ratio must be positive, got {0}")]
    InvalidAspect(f64),
}

/// Interior angle at `b` of the polyline `a-b-c`, degrees in [0, 180].
fn corner_angle(a: Point2, b: Point2, c: Point2) -> f64 {
    let u = a - b;
    let w = c - b;
    u.cross(w).abs().atan2(u.dot(w)).to_degrees()
}

/// Angle of an undirected line against a reference axis, folded into
/// (−90°, 90°].
fn line_angle(dir: Point2, axis: Point2) -> f64 {
    let a = axis.cross(dir).atan2(axis.dot(dir)).to_degrees();
    if a > 90.0 {
        a - 180.0
    } else if a <= -90.0 {
        a + 180.0
    } else {
        a
    }
}

/// Tilts `(α_h, α_v)` of the mid-lines of `q` for the labeling where side
/// `q0q1` is the top.
///
/// `α_h` is the angle of the line through the midpoints of the left and right
/// sides against the x axis; `α_v` the angle of the line through the
/// midpoints of the top and bottom sides against the y axis.
pub fn midline_tilts(q: &[Point2; 4]) -> (f64, f64) {
    let mid = |a: Point2, b: Point2| (a + b).scale(0.5);
    let left = mid(q[3], q[0]);
    let right = mid(q[1], q[2]);
    let top = mid(q[0], q[1]);
    let bottom = mid(q[2], q[3]);
    let alpha_h = line_angle(right - left, Point2::new(1.0, 0.0));
    let alpha_v = line_angle(bottom - top, Point2::new(0.0, 1.0));
    (alpha_h, alpha_v)
}

/// Metrics of the already mapped quadrangle `q` (corners clockwise from the
/// template's top-left).
pub fn evaluate_mapped(q: &[Point2; 4], t: f64) -> Result<EvalReport, MetricsError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(MetricsError::InvalidAspect(t));
    }
    if !is_simple_quad(q) {
        return Err(MetricsError::SelfIntersecting);
    }
    let d_rect = (0..4)
        .map(|i| (90.0 - corner_angle(q[(i + 3) % 4], q[i], q[(i + 1) % 4])).abs())
        .sum::<f64>()
        / 4.0;

    let a = q[0].distance(q[1]);
    let b = q[1].distance(q[2]);
    let c = q[2].distance(q[3]);
    let d = q[3].distance(q[0]);

    let (h0, v0) = midline_tilts(q);
    let d_rot_std = 0.5 * (h0.abs() + v0.abs());
    // Relabel so that q1q2 is the top side.
    let rotated = [q[1], q[2], q[3], q[0]];
    let (h1, v1) = midline_tilts(&rotated);
    let d_rot_alt = 0.5 * (h1.abs() + v1.abs());

    let (d_rot, rotated90) = if d_rot_alt < d_rot_std {
        (d_rot_alt, true)
    } else {
        (d_rot_std, false)
    };
    // a and c stay the template's top and bottom whatever the labeling.
    let ratio = (a + c) / (b + d);
    Ok(EvalReport {
        d_rect,
        d_rot,
        d_ar: (ratio - t).abs() / t,
        rotated90,
    })
}

/// Maps `quad` through `h` and evaluates the result against aspect `t`.
pub fn evaluate(quad: &Quadrangle, t: f64, h: &Mat3) -> Result<EvalReport, MetricsError> {
    let mut mapped = [Point2::default(); 4];
    for (m, &c) in mapped.iter_mut().zip(quad.corners()) {
        *m = apply_homography(h, c).map_err(|_| MetricsError::CornerAtInfinity)?;
    }
    evaluate_mapped(&mapped, t)
}
