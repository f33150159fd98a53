//! Synthetic Manhattan scenes with ground truth, plus a brute-force
//! vanishing-point oracle.
//!
//! A rectangle lies on a plane at unit distance in front of the camera; its
//! orientation is the `plane_rotation` applied to a fronto-parallel pose. Grid
//! segments along the rectangle's two axes are projected through the pinhole
//! model, their endpoints perturbed by isotropic Gaussian noise, and uniformly
//! random outlier chords are appended.
//!
//! Randomness: ChaCha8 seeded from `seed`. Uniform variates take the top 53
//! bits of `next_u64`; normal variates use the Box–Muller transform on two
//! uniforms `(u1, u2)` as `√(−2 ln(1 − u1)) · (cos 2πu2, sin 2πu2)`.

use crate::consistency::{robust_cost, RobustThreshold};
use crate::geom::{
    mat3_rows, rotation_x, rotation_y, CameraIntrinsics, Mat3, Point2, Quadrangle, Segment, Vec3,
};
use crate::vp_detect::ImageSize;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vanishing points farther than this from the principal point are treated
/// as being at infinity.
pub const MAX_VP_DISTANCE: f64 = 1e9;

fn default_aspect() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub intrinsics: CameraIntrinsics,
    #[serde(with = "mat3_rows")]
    pub plane_rotation: Mat3,
    /// Segment counts `(n_h, n_v)` along the two object directions.
    pub grid: (usize, usize),
    pub sigma: f64,
    pub outlier_fraction: f64,
    pub seed: u64,
    pub image_size: ImageSize,
    /// Width/height of the object rectangle.
    #[serde(default = "default_aspect")]
    pub aspect: f64,
}

impl SceneSpec {
    /// A noise-free 10+10 scene for a 640×480 camera with `f = 800`, the
    /// plane tilted by `tilt_x` degrees about the camera x axis and then
    /// `tilt_y` about the y axis.
    pub fn tilted(tilt_x: f64, tilt_y: f64) -> Self {
        let image_size = ImageSize::new(640, 480);
        Self {
            intrinsics: CameraIntrinsics {
                f: 800.0,
                principal: image_size.center(),
            },
            plane_rotation: tilt_rotation(tilt_x, tilt_y),
            grid: (10, 10),
            sigma: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
            image_size,
            aspect: default_aspect(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |what: &'static str| Err(SynthError::InvalidSpec(what));
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be non-negative");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1)");
        }
        if self.grid.0 < 2 || self.grid.1 < 2 {
            return bad("need at least two segments per direction");
        }
        if !(self.intrinsics.f > 0.0 && self.intrinsics.f.is_finite()) {
            return bad("focal length must be positive");
        }
        if self.image_size.width == 0 || self.image_size.height == 0 {
            return bad("image size must be positive");
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return bad("aspect must be positive");
        }
        let r = &self.plane_rotation;
        let ortho = (r.transpose() * r - Mat3::identity()).abs().max();
        if !(ortho < 1e-9 && (r.determinant() - 1.0).abs() < 1e-9) {
            return bad("plane_rotation must be a proper rotation");
        }
        Ok(())
    }
}

/// Rotation by `tilt_x` degrees about x followed by `tilt_y` about y.
pub fn tilt_rotation(tilt_x: f64, tilt_y: f64) -> Mat3 {
    rotation_y(tilt_y) * rotation_x(tilt_x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub v_h: Point2,
    pub v_v: Point2,
    /// Image-to-object-plane homography; maps `quad` onto an axis-aligned
    /// rectangle of width/height `aspect` centred at the origin.
    #[serde(rename = "H_true", with = "mat3_rows")]
    pub h_true: Mat3,
    pub quad: Quadrangle,
    pub aspect: f64,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(&'static str),
    #[error("vanishing point at infinity: the {0} object direction is parallel to the image plane")]
    DegeneratePose(&'static str),
    #[error("object rectangle cannot be placed in front of the camera and inside the image")]
    ObjectNotVisible,
}

struct Sampler(ChaCha8Rng);

impl Sampler {
    fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in [0, 1).
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Pair of independent standard normals.
    fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

/// Plane geometry shared by ground truth and segment generation.
struct Plane {
    /// Plane-to-image homography `K·[u w o]`.
    to_image: Mat3,
    half_w: f64,
    half_h: f64,
}

impl Plane {
    fn project(&self, x: f64, y: f64) -> Option<Point2> {
        let h = self.to_image * Vec3::new(x, y, 1.0);
        (h.z > 0.0).then(|| Point2::new(h.x / h.z, h.y / h.z))
    }

    fn corners(&self) -> Option<[Point2; 4]> {
        let (w, h) = (self.half_w, self.half_h);
        Some([
            self.project(-w, -h)?,
            self.project(w, -h)?,
            self.project(w, h)?,
            self.project(-w, h)?,
        ])
    }
}

fn vanishing_point(k: &CameraIntrinsics, dir: Vec3, which: &'static str) -> Result<Point2, SynthError> {
    let h = k.matrix() * dir;
    let p = Point2::from_homogeneous(&h).map_err(|_| SynthError::DegeneratePose(which))?;
    if p.distance(k.principal) > MAX_VP_DISTANCE {
        return Err(SynthError::DegeneratePose(which));
    }
    Ok(p)
}

/// Finds the object scale filling about 60% of the image.
fn place_object(spec: &SceneSpec, to_image: Mat3) -> Result<Plane, SynthError> {
    let (w, h) = (spec.image_size.width as f64, spec.image_size.height as f64);
    let (mx, my) = (0.2 * w, 0.2 * h);
    let fits = |s: f64| -> bool {
        let plane = Plane {
            to_image,
            half_w: s * spec.aspect,
            half_h: s,
        };
        let depth_ok = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .all(|&(a, b)| (to_image * Vec3::new(a * plane.half_w, b * plane.half_h, 1.0)).z > 0.2);
        depth_ok
            && plane.corners().is_some_and(|c| {
                c.iter()
                    .all(|p| p.x >= mx && p.x <= w - mx && p.y >= my && p.y <= h - my)
            })
    };
    let (mut lo, mut hi) = (0.0, 10.0);
    if !fits(1e-6) {
        return Err(SynthError::ObjectNotVisible);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Plane {
        to_image,
        half_w: lo * spec.aspect,
        half_h: lo,
    })
}

/// Generates the segment list and ground truth for `spec`.
pub fn generate(spec: &SceneSpec) -> Result<(Vec<Segment>, GroundTruth), SynthError> {
    spec.validate()?;
    let k = &spec.intrinsics;
    let r = &spec.plane_rotation;
    let u: Vec3 = r.column(0).into_owned();
    let w: Vec3 = r.column(1).into_owned();
    let origin = Vec3::new(0.0, 0.0, 1.0);

    let v_h = vanishing_point(k, u, "horizontal")?;
    let v_v = vanishing_point(k, w, "vertical")?;

    let to_image = k.matrix() * Mat3::from_columns(&[u, w, origin]);
    let plane = place_object(spec, to_image)?;
    let corners = plane.corners().ok_or(SynthError::ObjectNotVisible)?;
    let quad = Quadrangle::new(corners).map_err(|_| SynthError::ObjectNotVisible)?;
    let h_true = to_image
        .try_inverse()
        .ok_or(SynthError::ObjectNotVisible)?;

    let mut rng = Sampler::new(spec.seed);
    let mut segments = Vec::new();
    let (n_h, n_v) = spec.grid;
    let (hw, hh) = (plane.half_w, plane.half_h);
    // Both families draw lengths from the same range so that neither is
    // starved by the mean-length gate.
    let short_side = 2.0 * hw.min(hh);
    for (count, horizontal) in [(n_h, true), (n_v, false)] {
        let half = if horizontal { hw } else { hh };
        for i in 0..count {
            let across = -1.0 + 2.0 * i as f64 / (count - 1) as f64;
            let len = rng.range(0.5, 1.0) * short_side;
            let a = rng.range(-half, half - len);
            let b = a + len;
            let (p1, p2) = if horizontal {
                (plane.project(a, across * hh), plane.project(b, across * hh))
            } else {
                (plane.project(across * hw, a), plane.project(across * hw, b))
            };
            let (p1, p2) = p1.zip(p2).ok_or(SynthError::ObjectNotVisible)?;
            segments.push(noisy_segment(&mut rng, p1, p2, spec.sigma));
        }
    }

    let n_out = (spec.outlier_fraction * (n_h + n_v) as f64 - 1e-9).ceil().max(0.0) as usize;
    let (iw, ih) = (spec.image_size.width as f64, spec.image_size.height as f64);
    let diag = spec.image_size.diagonal();
    for _ in 0..n_out {
        segments.push(outlier_chord(&mut rng, iw, ih, diag));
    }

    Ok((
        segments,
        GroundTruth {
            v_h,
            v_v,
            h_true,
            quad,
            aspect: spec.aspect,
            intrinsics: *k,
        },
    ))
}

fn noisy_segment(rng: &mut Sampler, p1: Point2, p2: Point2, sigma: f64) -> Segment {
    loop {
        let (a, b) = rng.normal_pair();
        let (c, d) = rng.normal_pair();
        let q1 = p1 + Point2::new(a, b).scale(sigma);
        let q2 = p2 + Point2::new(c, d).scale(sigma);
        if let Ok(s) = Segment::new(q1, q2) {
            return s;
        }
    }
}

fn outlier_chord(rng: &mut Sampler, w: f64, h: f64, diag: f64) -> Segment {
    loop {
        let c = Point2::new(rng.range(0.0, w), rng.range(0.0, h));
        let theta = rng.range(0.0, std::f64::consts::PI);
        let len = rng.range(0.05, 0.3) * diag;
        let e = Point2::new(theta.cos(), theta.sin()).scale(0.5 * len);
        let (p1, p2) = (c - e, c + e);
        let inside = |p: Point2| p.x >= 0.0 && p.x <= w && p.y >= 0.0 && p.y <= h;
        if inside(p1) && inside(p2) {
            if let Ok(s) = Segment::new(p1, p2) {
                return s;
            }
        }
    }
}

/// Exhaustive minimiser of the robust cost over a square grid of side
/// `window` centred at `center` with spacing `step`. Ties keep the first grid
/// point in row-major order.
pub fn grid_search_vp(
    segments: &[Segment],
    t_d: RobustThreshold,
    center: Point2,
    window: f64,
    step: f64,
) -> Point2 {
    assert!(step > 0.0, "grid step must be positive");
    let n = ((0.5 * window / step) + 1e-9).floor().max(0.0) as i64;
    let mut best = (f64::INFINITY, center);
    for j in -n..=n {
        for i in -n..=n {
            let v = Point2::new(center.x + i as f64 * step, center.y + j as f64 * step);
            let c = robust_cost(v, segments, t_d);
            if c < best.0 {
                best = (c, v);
            }
        }
    }
    best.1
}
