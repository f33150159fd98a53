//! Detection of one pair of orthogonal vanishing points from line segments.
//!
//! Pipeline: pairwise intersections of long segments give rough candidates;
//! each gets an inlier set under the consistency threshold; near-duplicate
//! candidates are merged; survivors are refined with conjugate gradients on
//! the robust cost over their inliers; candidates close to the principal point
//! are dropped; finally the pair with the right-ish angle at the principal
//! point and the largest total inlier length wins.

use crate::consistency::{robust_cost_and_gradient, within_threshold, RobustThreshold};
use crate::geom::{line_intersection, CameraIntrinsics, Point2, Segment};
use crate::optimize::{minimize, OptimizerConfig};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    /// Rough-candidate length gate as a multiple of the mean segment length.
    pub t_l_factor: f64,
    /// Use the strict `length > T_L` comparison instead of `≥`.
    pub strict_length_gate: bool,
    /// Inlier threshold `T_D` (px²).
    pub t_d: f64,
    /// Dedup budget `T_s` (px); `None` means 5% of the total segment length.
    pub t_s: Option<f64>,
    /// Principal-point exclusion radius as a fraction of the image diagonal.
    pub t_d_factor: f64,
    /// Angle gate: pairs need `α > 90° − t_alpha1` ...
    pub t_alpha1: f64,
    /// ... and `α < t_alpha2` (degrees).
    pub t_alpha2: f64,
    pub max_rough_candidates: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            t_l_factor: 1.0,
            strict_length_gate: false,
            t_d: 4.0,
            t_s: None,
            t_d_factor: 0.2,
            t_alpha1: 5.0,
            t_alpha2: 170.0,
            max_rough_candidates: 2000,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |what: &'static str| Err(DetectError::InvalidConfig(what));
        if !(self.t_l_factor > 0.0) {
            return bad("t_l_factor must be positive");
        }
        if !(self.t_d > 0.0 && self.t_d.is_finite()) {
            return bad("t_d must be positive");
        }
        if let Some(t_s) = self.t_s {
            if !(t_s > 0.0) {
                return bad("t_s must be positive");
            }
        }
        if !(self.t_d_factor > 0.0) {
            return bad("t_d_factor must be positive");
        }
        if !(self.t_alpha1 > 0.0 && self.t_alpha1 < 90.0) {
            return bad("t_alpha1 must lie in (0, 90)");
        }
        if !(self.t_alpha2 > 90.0 && self.t_alpha2 <= 180.0) {
            return bad("t_alpha2 must lie in (90, 180]");
        }
        if self.max_rough_candidates == 0 {
            return bad("max_rough_candidates must be positive");
        }
        if !self.optimizer.is_valid() {
            return bad("invalid optimizer settings");
        }
        Ok(())
    }

    fn threshold(&self) -> RobustThreshold {
        RobustThreshold::new(self.t_d).expect("validated t_d")
    }

    pub fn dedup_budget(&self, segments: &[Segment]) -> f64 {
        self.t_s
            .unwrap_or_else(|| 0.05 * segments.iter().map(Segment::length).sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("need at least {required} segments, got {got}")]
    TooFewSegments { got: usize, required: usize },
    #[error("no rough candidates: no non-parallel pair of segments passes the length gate")]
    NoRoughCandidates,
    #[error("all {0} refined candidates lie within the principal-point exclusion radius")]
    AllNearPrincipal(usize),
    #[error("fewer than two candidates survive refinement and the principal-point gate ({0})")]
    TooFewCandidates(usize),
    #[error("no candidate pair passes the angle gate ({tested} pairs tested)")]
    NoPairPassesAngleGate { tested: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

impl DetectError {
    /// Short name of the pipeline gate that rejected the input.
    pub fn gate(&self) -> &'static str {
        match self {
            DetectError::TooFewSegments { .. } => "segment-count",
            DetectError::NoRoughCandidates => "length-gate",
            DetectError::AllNearPrincipal(_) => "principal-point-gate",
            DetectError::TooFewCandidates(_) => "candidate-count",
            DetectError::NoPairPassesAngleGate { .. } => "angle-gate",
            DetectError::InvalidConfig(_) => "config",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VpCandidate {
    pub v: Point2,
    /// Sorted segment indices.
    pub inliers: Vec<usize>,
    pub inlier_length_sum: f64,
}

impl VpCandidate {
    pub fn new(v: Point2, segments: &[Segment], t_d: f64) -> Self {
        let inliers = inlier_set(v, segments, t_d);
        let inlier_length_sum = inliers.iter().map(|&i| segments[i].length()).sum();
        Self {
            v,
            inliers,
            inlier_length_sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VpPair {
    pub e_h: Point2,
    pub e_v: Point2,
    pub f_estimated: Option<f64>,
    pub inliers_h: Vec<usize>,
    pub inliers_v: Vec<usize>,
}

/// `Inl(v) = { i | D(v, s_i) ≤ T_D }`.
pub fn inlier_set(v: Point2, segments: &[Segment], t_d: f64) -> Vec<usize> {
    segments
        .iter()
        .enumerate()
        .filter(|(_, s)| within_threshold(v, s, t_d))
        .map(|(i, _)| i)
        .collect()
}

/// Pairwise carrier-line intersections of the long segments, each with its
/// inlier set. At most `max_rough_candidates` pairs are kept, preferring
/// pairs with the largest product of lengths.
pub fn rough_candidates(segments: &[Segment], cfg: &DetectConfig) -> Vec<VpCandidate> {
    if segments.len() < 2 {
        return Vec::new();
    }
    let lengths: Vec<f64> = segments.iter().map(Segment::length).collect();
    let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
    let t_l = cfg.t_l_factor * mean;
    let long: Vec<usize> = (0..segments.len())
        .filter(|&i| {
            if cfg.strict_length_gate {
                lengths[i] > t_l
            } else {
                lengths[i] >= t_l
            }
        })
        .collect();

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (k, &i) in long.iter().enumerate() {
        for &j in &long[k + 1..] {
            pairs.push((lengths[i] * lengths[j], i, j));
        }
    }
    // Stable: ties keep (i, j) order.
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    pairs
        .iter()
        .filter_map(|&(_, i, j)| line_intersection(&segments[i], &segments[j]).ok())
        .take(cfg.max_rough_candidates)
        .map(|v| VpCandidate::new(v, segments, cfg.t_d))
        .collect()
}

/// Whether the weighted symmetric difference of two sorted index sets is
/// below `limit`. Stops as soon as the running sum reaches it.
fn symmetric_difference_below(a: &[usize], b: &[usize], lengths: &[f64], limit: f64) -> bool {
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                sum += lengths[a[i]];
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                sum += lengths[b[j]];
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
                continue;
            }
        }
        if sum >= limit {
            return false;
        }
    }
    for &k in a[i..].iter().chain(&b[j..]) {
        sum += lengths[k];
        if sum >= limit {
            return false;
        }
    }
    sum < limit
}

/// Sorts candidates by inlier count (then inlier length, then original order)
/// and drops every candidate whose inlier set differs from an already kept
/// one by less than `t_s` pixels of segment length.
pub fn dedup(cands: Vec<VpCandidate>, segments: &[Segment], t_s: f64) -> Vec<VpCandidate> {
    let lengths: Vec<f64> = segments.iter().map(Segment::length).collect();
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&x, &y| {
        let (a, b) = (&cands[x], &cands[y]);
        b.inliers
            .len()
            .cmp(&a.inliers.len())
            .then(b.inlier_length_sum.total_cmp(&a.inlier_length_sum))
            .then(x.cmp(&y))
    });
    let mut kept: Vec<VpCandidate> = Vec::new();
    for idx in order {
        let c = &cands[idx];
        // |Σa − Σb| is a lower bound on the symmetric difference.
        let duplicate = kept.iter().any(|k| {
            (k.inlier_length_sum - c.inlier_length_sum).abs() <= t_s * (1.0 + 1e-9)
                && symmetric_difference_below(&k.inliers, &c.inliers, &lengths, t_s)
        });
        if !duplicate {
            kept.push(c.clone());
        }
    }
    kept
}

/// Refines one candidate by minimising the robust cost over its inliers.
/// Candidates with fewer than two inliers are returned unchanged.
pub fn refine_point(c: &VpCandidate, segments: &[Segment], cfg: &DetectConfig) -> Point2 {
    if c.inliers.len() < 2 {
        return c.v;
    }
    let t = cfg.threshold();
    let m = minimize(
        |v| robust_cost_and_gradient(v, segments, &c.inliers, t),
        c.v,
        &cfg.optimizer,
    );
    m.point
}

/// Refines every candidate, recomputes inlier sets over all segments and
/// merges duplicates again.
pub fn refine_candidates(
    cands: &[VpCandidate],
    segments: &[Segment],
    cfg: &DetectConfig,
) -> Vec<VpCandidate> {
    let refined: Vec<VpCandidate> = cands
        .iter()
        .map(|c| VpCandidate::new(refine_point(c, segments, cfg), segments, cfg.t_d))
        .collect();
    dedup(refined, segments, cfg.dedup_budget(segments))
}

/// Drops candidates closer than `t_d_factor · diag` to the principal point.
pub fn filter_near_principal(
    cands: Vec<VpCandidate>,
    principal: Point2,
    diag: f64,
    cfg: &DetectConfig,
) -> Vec<VpCandidate> {
    let t_d = cfg.t_d_factor * diag;
    cands
        .into_iter()
        .filter(|c| !(c.v.distance(principal) < t_d))
        .collect()
}

/// Angle (degrees, in [0, 180]) between `a − p` and `b − p`.
pub fn angle_at(p: Point2, a: Point2, b: Point2) -> f64 {
    let u = a - p;
    let w = b - p;
    u.cross(w).abs().atan2(u.dot(w)).to_degrees()
}

fn union_length(a: &[usize], b: &[usize], lengths: &[f64]) -> f64 {
    let both: f64 = {
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += lengths[a[i]];
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    };
    let sa: f64 = a.iter().map(|&k| lengths[k]).sum();
    let sb: f64 = b.iter().map(|&k| lengths[k]).sum();
    sa + sb - both
}

/// Fraction of the inliers' total extent that is horizontal in the image.
fn horizontalness(inliers: &[usize], segments: &[Segment]) -> f64 {
    let (mut h, mut all) = (0.0, 0.0);
    for &i in inliers {
        let d = segments[i].direction();
        h += d.x.abs();
        all += d.x.abs() + d.y.abs();
    }
    if all > 0.0 {
        h / all
    } else {
        0.5
    }
}

/// Picks the best pair passing the angle gate `90° − T_α¹ < α < T_α²`.
///
/// The score is the total length of the union of both inlier sets. Within
/// the winning pair the vanishing point whose inliers run more horizontally
/// in the image is reported as `e_h`.
pub fn select_pair(
    cands: &[VpCandidate],
    segments: &[Segment],
    principal: Point2,
    cfg: &DetectConfig,
) -> Result<VpPair, DetectError> {
    if cands.len() < 2 {
        return Err(DetectError::TooFewCandidates(cands.len()));
    }
    let lengths: Vec<f64> = segments.iter().map(Segment::length).collect();
    let lo = 90.0 - cfg.t_alpha1;
    let mut best: Option<(f64, usize, usize)> = None;
    let mut tested = 0;
    for i in 0..cands.len() {
        for j in i + 1..cands.len() {
            tested += 1;
            let alpha = angle_at(principal, cands[i].v, cands[j].v);
            if !(alpha > lo && alpha < cfg.t_alpha2) {
                continue;
            }
            let score = union_length(&cands[i].inliers, &cands[j].inliers, &lengths);
            if best.is_none_or(|(s, _, _)| score > s) {
                best = Some((score, i, j));
            }
        }
    }
    let (_, i, j) = best.ok_or(DetectError::NoPairPassesAngleGate { tested })?;
    let (a, b) = (&cands[i], &cands[j]);
    let (h, v) = if horizontalness(&a.inliers, segments) >= horizontalness(&b.inliers, segments) {
        (a, b)
    } else {
        (b, a)
    };
    Ok(VpPair {
        e_h: h.v,
        e_v: v.v,
        f_estimated: None,
        inliers_h: h.inliers.clone(),
        inliers_v: v.inliers.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("vanishing points subtend an angle of at most 90° at the principal point; focal length not computable")]
pub struct AcuteAngleError;

/// Focal length making the back-projected directions of `v1` and `v2`
/// orthogonal: `f = √(−(v1 − p)·(v2 − p))`.
pub fn estimate_focal(v1: Point2, v2: Point2, principal: Point2) -> Result<f64, AcuteAngleError> {
    let dot = (v1 - principal).dot(v2 - principal);
    if dot < 0.0 {
        Ok((-dot).sqrt())
    } else {
        Err(AcuteAngleError)
    }
}

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

/// Intermediate results of one detection run, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectTrace {
    pub rough: usize,
    pub after_dedup: usize,
    pub refined: usize,
    pub after_principal_gate: usize,
}

/// Full detector with the principal point and diagonal given explicitly.
pub fn detect_with(
    segments: &[Segment],
    principal: Point2,
    diag: f64,
    cfg: &DetectConfig,
) -> Result<(VpPair, DetectTrace), DetectError> {
    cfg.validate()?;
    if segments.len() < 4 {
        return Err(DetectError::TooFewSegments {
            got: segments.len(),
            required: 4,
        });
    }
    let rough = rough_candidates(segments, cfg);
    if rough.is_empty() {
        return Err(DetectError::NoRoughCandidates);
    }
    let n_rough = rough.len();
    let t_s = cfg.dedup_budget(segments);
    let unique = dedup(rough, segments, t_s);
    let n_unique = unique.len();
    let refined = refine_candidates(&unique, segments, cfg);
    let n_refined = refined.len();
    let kept = filter_near_principal(refined, principal, diag, cfg);
    if kept.is_empty() {
        return Err(DetectError::AllNearPrincipal(n_refined));
    }
    let trace = DetectTrace {
        rough: n_rough,
        after_dedup: n_unique,
        refined: n_refined,
        after_principal_gate: kept.len(),
    };
    let pair = select_pair(&kept, segments, principal, cfg)?;
    Ok((pair, trace))
}

/// Detects the vanishing-point pair of `segments`.
///
/// With `intrinsics` absent the principal point is the image center and the
/// focal length is estimated from the pair when the angle permits.
pub fn detect(
    segments: &[Segment],
    image: ImageSize,
    intrinsics: Option<&CameraIntrinsics>,
    cfg: &DetectConfig,
) -> Result<VpPair, DetectError> {
    let principal = intrinsics.map_or_else(|| image.center(), |k| k.principal);
    let (mut pair, _) = detect_with(segments, principal, image.diagonal(), cfg)?;
    if intrinsics.is_none() {
        pair.f_estimated = estimate_focal(pair.e_h, pair.e_v, principal).ok();
    }
    Ok(pair)
}
