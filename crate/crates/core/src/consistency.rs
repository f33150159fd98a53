//! Segment/vanishing-point consistency and the capped robust cost.
//!
//! Under isotropic Gaussian endpoint noise, the maximum-likelihood fit of a
//! line through a hypothesised vanishing point `v` to one segment leaves a
//! residual equal to the smallest eigenvalue of the 2×2 scatter of the two
//! endpoints about `v`. Summing that residual over segments, with a cap at
//! `T_D` for outliers, gives the cost minimised by the detector.

use crate::geom::{Point2, Segment};
use thiserror::Error;

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ScatterMatrix {
    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    /// Half the eigengap, `√(((a−c)/2)² + b²)`.
    fn half_gap(&self) -> f64 {
        let h = 0.5 * (self.a - self.c);
        (h * h + self.b * self.b).sqrt()
    }

    pub fn lambda_max(&self) -> f64 {
        0.5 * (self.a + self.c) + self.half_gap()
    }

    pub fn lambda_min(&self) -> f64 {
        lambda_min(self)
    }

    /// Unit eigenvector of the smallest eigenvalue, or `None` when the two
    /// eigenvalues are too close for the direction to be defined.
    pub fn min_eigenvector(&self) -> Option<Point2> {
        let gap = 2.0 * self.half_gap();
        if !(gap > eps_eig(self)) {
            return None;
        }
        let lmin = 0.5 * (self.a + self.c) - 0.5 * gap;
        // Two algebraically equivalent null vectors of (M - λI); keep the
        // better conditioned one.
        let u1 = Point2::new(self.b, lmin - self.a);
        let u2 = Point2::new(lmin - self.c, self.b);
        let u = if u1.norm() >= u2.norm() { u1 } else { u2 };
        let n = u.norm();
        (n > 0.0).then(|| u.scale(1.0 / n))
    }
}

/// Robust inlier threshold `T_D` in squared pixels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RobustThreshold(f64);

impl RobustThreshold {
    pub fn new(t_d: f64) -> Result<Self, ConsistencyError> {
        if t_d > 0.0 && t_d.is_finite() {
            Ok(Self(t_d))
        } else {
            Err(ConsistencyError::InvalidThreshold(t_d))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ConsistencyError {
    #[error("eigenvalues of the scatter matrix are degenerate; gradient undefined")]
    DegenerateEigenvalue,
    #[error("robust threshold must be positive, got {0}")]
    InvalidThreshold(f64),
}

/// Relative eigengap below which the smallest eigenvector is treated as
/// undefined.
pub fn eps_eig(m: &ScatterMatrix) -> f64 {
    1e-9 * m.trace()
}

/// `Σ_j (x_j − v)(x_j − v)ᵀ` over both endpoints.
pub fn scatter(v: Point2, s: &Segment) -> ScatterMatrix {
    let d1 = s.p1() - v;
    let d2 = s.p2() - v;
    ScatterMatrix {
        a: d1.x * d1.x + d2.x * d2.x,
        b: d1.x * d1.y + d2.x * d2.y,
        c: d1.y * d1.y + d2.y * d2.y,
    }
}

/// Closed-form smallest eigenvalue, clamped at zero.
pub fn lambda_min(m: &ScatterMatrix) -> f64 {
    (0.5 * (m.a + m.c) - m.half_gap()).max(0.0)
}

/// `D(v, s)`: the minimum over lines through `v` of the summed squared
/// distances of the segment endpoints to that line.
///
/// Evaluated as `det / λ_max` with `det = ((x₁ − v) × (x₂ − v))²`, which equals
/// `lambda_min(scatter(v, s))` without the cancellation of the closed form when
/// the segment points almost exactly at `v`.
pub fn consistency(v: Point2, s: &Segment) -> f64 {
    consistency_of(v, s, &scatter(v, s))
}

fn consistency_of(v: Point2, s: &Segment, m: &ScatterMatrix) -> f64 {
    let cross = (s.p1() - v).cross(s.p2() - v);
    if cross == 0.0 {
        return 0.0;
    }
    let lmax = m.lambda_max();
    if lmax > 0.0 {
        cross * cross / lmax
    } else {
        0.0
    }
}

/// `D(v, s) ≤ t_d`, skipping the eigenvalue when `cross² / trace` (a lower
/// bound on `D`, since `λ_max ≤ trace`) already exceeds `t_d`.
pub fn within_threshold(v: Point2, s: &Segment, t_d: f64) -> bool {
    if clearly_above(v, s, t_d) {
        return false;
    }
    consistency(v, s) <= t_d
}

fn clearly_above(v: Point2, s: &Segment, t_d: f64) -> bool {
    let d1 = s.p1() - v;
    let d2 = s.p2() - v;
    let cross = d1.cross(d2);
    let trace = d1.dot(d1) + d2.dot(d2);
    cross * cross > t_d * trace * (1.0 + 1e-9)
}

/// Robust cost `Σ min(T_D, D(v, s))`.
pub fn robust_cost(v: Point2, segments: &[Segment], t: RobustThreshold) -> f64 {
    segments
        .iter()
        .map(|s| consistency(v, s).min(t.value()))
        .sum()
}

/// Robust cost restricted to the segments at `indices`.
pub fn robust_cost_subset(
    v: Point2,
    segments: &[Segment],
    indices: &[usize],
    t: RobustThreshold,
) -> f64 {
    indices
        .iter()
        .map(|&i| consistency(v, &segments[i]).min(t.value()))
        .sum()
}

/// Analytic `∇_v D(v, s) = −2 Σ_j (u·(x_j − v)) u`.
pub fn consistency_gradient(v: Point2, s: &Segment) -> Result<Point2, ConsistencyError> {
    let m = scatter(v, s);
    let u = m
        .min_eigenvector()
        .ok_or(ConsistencyError::DegenerateEigenvalue)?;
    let proj: f64 = s.endpoints().iter().map(|&x| u.dot(x - v)).sum();
    Ok(u.scale(-2.0 * proj))
}

/// Central-difference gradient of [`consistency`], used where the analytic
/// one is undefined.
pub fn consistency_gradient_fd(v: Point2, s: &Segment) -> Point2 {
    let h = 1e-5 * (1.0 + v.norm());
    let dx = Point2::new(h, 0.0);
    let dy = Point2::new(0.0, h);
    Point2::new(
        (consistency(v + dx, s) - consistency(v - dx, s)) / (2.0 * h),
        (consistency(v + dy, s) - consistency(v - dy, s)) / (2.0 * h),
    )
}

/// Value and gradient of the robust cost over `indices`. Segments at or
/// above the cap contribute `T_D` and no gradient.
pub fn robust_cost_and_gradient(
    v: Point2,
    segments: &[Segment],
    indices: &[usize],
    t: RobustThreshold,
) -> (f64, Point2) {
    let mut cost = 0.0;
    let mut grad = Point2::default();
    for &i in indices {
        let s = &segments[i];
        if clearly_above(v, s, t.value()) {
            cost += t.value();
            continue;
        }
        let (d1, d2) = (s.p1() - v, s.p2() - v);
        let m = scatter(v, s);
        let half_gap = m.half_gap();
        let lmax = 0.5 * m.trace() + half_gap;
        let cross = d1.cross(d2);
        let d = if cross != 0.0 && lmax > 0.0 { cross * cross / lmax } else { 0.0 };
        if d >= t.value() {
            cost += t.value();
            continue;
        }
        cost += d;
        // −2 (u uᵀ) Σ(x − v) with u uᵀ = (λ_max I − M) / (λ_max − λ_min).
        let g = if 2.0 * half_gap > eps_eig(&m) {
            let sum = d1 + d2;
            let ms = Point2::new(m.a * sum.x + m.b * sum.y, m.b * sum.x + m.c * sum.y);
            (sum.scale(lmax) - ms).scale(-1.0 / half_gap)
        } else {
            consistency_gradient_fd(v, s)
        };
        grad = grad + g;
    }
    (cost, grad)
}
