//! Planar and homogeneous geometry primitives shared by the whole pipeline.
//!
//! Image coordinates follow the usual raster convention: origin at the top-left
//! corner, `x` to the right, `y` downwards, all values in pixels.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 3×3 real matrix (row-major semantics, as in `nalgebra`).
pub type Mat3 = Matrix3<f64>;

/// 3-vector used for homogeneous image points and camera-frame directions.
pub type Vec3 = Vector3<f64>;

/// Threshold on the normalized cross product of two carrier-line directions
/// below which the lines are reported as parallel.
pub const EPS_PARALLEL: f64 = 1e-12;

/// Smallest magnitude of the homogeneous `w` accepted when dehomogenizing.
pub const EPS_W: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeomError {
    #[error("segment endpoints coincide")]
    ZeroLengthSegment,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("carrier lines are parallel")]
    Parallel,
    #[error("point maps to infinity (|w| < {EPS_W:e})")]
    AtInfinity,
    #[error("quadrangle is self-intersecting or has non-positive (counter-clockwise) area")]
    DegenerateQuadrangle,
    #[error("focal length must be positive and finite, got {0}")]
    InvalidFocal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product of two planar vectors.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }

    /// Homogeneous representation `(x, y, 1)`.
    pub fn to_homogeneous(self) -> Vec3 {
        Vec3::new(self.x, self.y, 1.0)
    }

    /// Euclidean point of a homogeneous vector.
    pub fn from_homogeneous(h: &Vec3) -> Result<Point2, GeomError> {
        if !(h.z.abs() >= EPS_W) {
            return Err(GeomError::AtInfinity);
        }
        let p = Point2::new(h.x / h.z, h.y / h.z);
        if p.is_finite() {
            Ok(p)
        } else {
            Err(GeomError::NonFinite)
        }
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// A line segment with distinct, finite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    p1: Point2,
    p2: Point2,
}

impl Segment {
    pub fn new(p1: Point2, p2: Point2) -> Result<Self, GeomError> {
        if !p1.is_finite() || !p2.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if p1 == p2 {
            return Err(GeomError::ZeroLengthSegment);
        }
        Ok(Self { p1, p2 })
    }

    /// Convenience constructor from raw coordinates.
    pub fn from_coords(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeomError> {
        Self::new(Point2::new(x1, y1), Point2::new(x2, y2))
    }

    pub fn p1(&self) -> Point2 {
        self.p1
    }

    pub fn p2(&self) -> Point2 {
        self.p2
    }

    pub fn endpoints(&self) -> [Point2; 2] {
        [self.p1, self.p2]
    }

    pub fn length(&self) -> f64 {
        self.p1.distance(self.p2)
    }

    pub fn direction(&self) -> Point2 {
        self.p2 - self.p1
    }

    pub fn midpoint(&self) -> Point2 {
        (self.p1 + self.p2).scale(0.5)
    }

    /// Translated copy.
    pub fn shifted(&self, t: Point2) -> Segment {
        Segment {
            p1: self.p1 + t,
            p2: self.p2 + t,
        }
    }

    /// Distance from `p` to the infinite carrier line of the segment.
    pub fn line_distance(&self, p: Point2) -> f64 {
        let d = self.direction();
        d.cross(p - self.p1).abs() / d.norm()
    }
}

impl<'de> Deserialize<'de> for Segment {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            p1: Point2,
            p2: Point2,
        }
        let raw = Raw::deserialize(de)?;
        Segment::new(raw.p1, raw.p2).map_err(serde::de::Error::custom)
    }
}

/// Euclidean length of a segment.
pub fn length(s: &Segment) -> f64 {
    s.length()
}

/// Intersection of the infinite carrier lines through two segments.
///
/// Lines are intersected in homogeneous form about the centroid of the four
/// endpoints, which keeps the result symmetric in its arguments and well
/// conditioned for far intersections.
pub fn line_intersection(s1: &Segment, s2: &Segment) -> Result<Point2, GeomError> {
    let d1 = s1.direction();
    let d2 = s2.direction();
    let sin = d1.cross(d2) / (d1.norm() * d2.norm());
    if !(sin.abs() >= EPS_PARALLEL) {
        return Err(GeomError::Parallel);
    }
    let c = ((s1.p1 + s1.p2) + (s2.p1 + s2.p2)).scale(0.25);
    let l1 = (s1.p1 - c).to_homogeneous().cross(&(s1.p2 - c).to_homogeneous());
    let l2 = (s2.p1 - c).to_homogeneous().cross(&(s2.p2 - c).to_homogeneous());
    let h = l1.cross(&l2);
    Ok(Point2::from_homogeneous(&h)? + c)
}

/// Pinhole intrinsics with square pixels and zero skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub f: f64,
    pub principal: Point2,
}

impl CameraIntrinsics {
    pub fn new(f: f64, principal: Point2) -> Result<Self, GeomError> {
        if !(f > 0.0 && f.is_finite()) {
            return Err(GeomError::InvalidFocal(f));
        }
        if !principal.is_finite() {
            return Err(GeomError::NonFinite);
        }
        Ok(Self { f, principal })
    }

    /// Calibration matrix `K`.
    pub fn matrix(&self) -> Mat3 {
        let (f, p) = (self.f, self.principal);
        Mat3::new(f, 0.0, p.x, 0.0, f, p.y, 0.0, 0.0, 1.0)
    }

    /// Closed-form `K⁻¹`.
    pub fn inverse_matrix(&self) -> Mat3 {
        let (f, p) = (self.f, self.principal);
        let g = 1.0 / f;
        Mat3::new(g, 0.0, -p.x * g, 0.0, g, -p.y * g, 0.0, 0.0, 1.0)
    }

    /// Camera-frame direction `K⁻¹ (x, y, 1)ᵀ` of an image point.
    pub fn back_project(&self, p: Point2) -> Vec3 {
        Vec3::new(
            (p.x - self.principal.x) / self.f,
            (p.y - self.principal.y) / self.f,
            1.0,
        )
    }
}

pub fn intrinsics_matrix(c: &CameraIntrinsics) -> Mat3 {
    c.matrix()
}

pub fn intrinsics_inverse(c: &CameraIntrinsics) -> Mat3 {
    c.inverse_matrix()
}

/// Maps `p` through the homography `h` and dehomogenizes.
pub fn apply_homography(h: &Mat3, p: Point2) -> Result<Point2, GeomError> {
    Point2::from_homogeneous(&(h * p.to_homogeneous()))
}

/// Four corners ordered clockwise (in y-down image coordinates) starting at
/// the top-left one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrangle {
    corners: [Point2; 4],
}

impl Quadrangle {
    /// Accepts a simple quadrangle with positive signed area, i.e. clockwise
    /// winding on screen.
    pub fn new(corners: [Point2; 4]) -> Result<Self, GeomError> {
        if corners.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        if !is_simple_quad(&corners) || !(signed_area(&corners) > 0.0) {
            return Err(GeomError::DegenerateQuadrangle);
        }
        Ok(Self { corners })
    }

    pub fn corners(&self) -> &[Point2; 4] {
        &self.corners
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.corners)
    }
}

impl<'de> Deserialize<'de> for Quadrangle {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            corners: [Point2; 4],
        }
        let raw = Raw::deserialize(de)?;
        Quadrangle::new(raw.corners).map_err(serde::de::Error::custom)
    }
}

/// Shoelace area; positive for clockwise winding in y-down coordinates.
pub fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let twice: f64 = (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum();
    0.5 * twice
}

/// True when no two non-adjacent sides touch.
pub fn is_simple_quad(c: &[Point2; 4]) -> bool {
    !segments_touch(c[0], c[1], c[2], c[3]) && !segments_touch(c[1], c[2], c[3], c[0])
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test for `ab` and `cd`.
fn segments_touch(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Row-major `[[f64; 3]; 3]` view of a matrix, used for serialization.
pub fn mat3_to_rows(m: &Mat3) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

pub fn mat3_from_rows(r: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::new(
        r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
    )
}

/// Serde adapter storing a [`Mat3`] as three rows.
pub mod mat3_rows {
    use super::{mat3_from_rows, mat3_to_rows, Mat3};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat3, s: S) -> Result<S::Ok, S::Error> {
        mat3_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat3, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Ok(mat3_from_rows(&rows))
    }
}

/// Rotation about the camera x axis by `deg` degrees.
pub fn rotation_x(deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rotation_y(deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_z(deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}
