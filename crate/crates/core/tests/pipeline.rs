use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vprect::consistency::robust_cost_and_gradient;
use vprect::geom::signed_area;
use vprect::synth::grid_search_vp;
use vprect::vp_detect::{detect_with, refine_point, VpCandidate};
use vprect::{
    apply_homography, detect, evaluate, generate, minimize, rectification_from_vps, robust_cost, DetectConfig,
    CameraIntrinsics, ImageSize, OptimizerConfig, Point2, Quadrangle, RobustThreshold, SceneSpec,
    Segment,
};

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = uniform(rng, 0.0, 1.0);
    let u2 = uniform(rng, 0.0, 1.0);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_tilt(rng: &mut ChaCha8Rng) -> f64 {
    let t = uniform(rng, 10.0, 40.0);
    if rng.next_u64() & 1 == 0 {
        t
    } else {
        -t
    }
}

/// Noisy segments lying on rays from `v`.
fn pencil(rng: &mut ChaCha8Rng, v: Point2, n: usize, sigma: f64) -> Vec<Segment> {
    (0..n)
        .map(|i| {
            let theta = (150.0 + 8.0 * i as f64).to_radians();
            let e = Point2::new(theta.cos(), -theta.sin());
            let t1 = uniform(rng, 300.0, 500.0);
            let t2 = t1 + uniform(rng, 60.0, 200.0);
            let mut p = [v + e.scale(t1), v + e.scale(t2)];
            for q in &mut p {
                q.x += sigma * normal(rng);
                q.y += sigma * normal(rng);
            }
            Segment::new(p[0], p[1]).unwrap()
        })
        .collect()
}

#[test]
fn noise_free_scenes_are_recovered_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..20 {
        let mut spec = SceneSpec::tilted(random_tilt(&mut rng), random_tilt(&mut rng));
        spec.seed = seed;
        let (segs, truth) = generate(&spec).unwrap();
        let pair = detect(&segs, spec.image_size, Some(&spec.intrinsics), &DetectConfig::default()).unwrap();
        assert!(pair.e_h.distance(truth.v_h) < 1e-3, "{seed}: {:?} vs {:?}", pair.e_h, truth.v_h);
        assert!(pair.e_v.distance(truth.v_v) < 1e-3, "{seed}: {:?} vs {:?}", pair.e_v, truth.v_v);
        assert_eq!(pair.inliers_h.len(), 10);
        assert_eq!(pair.inliers_v.len(), 10);
    }
}

/// Segments inside a 640×480 image on lines through `v`, plus endpoint noise.
fn through_image(rng: &mut ChaCha8Rng, v: Point2, n: usize, sigma: f64) -> Vec<Segment> {
    (0..n)
        .map(|_| {
            let c = Point2::new(uniform(rng, 120.0, 520.0), uniform(rng, 90.0, 390.0));
            let u = (c - v).scale(1.0 / c.distance(v));
            let len = uniform(rng, 150.0, 300.0);
            let mut p = [c - u.scale(0.5 * len), c + u.scale(0.5 * len)];
            for q in &mut p {
                q.x += sigma * normal(rng);
                q.y += sigma * normal(rng);
            }
            Segment::new(p[0], p[1]).unwrap()
        })
        .collect()
}

#[test]
fn noisy_scene_rectifies_well() {
    let (vh, vv) = (Point2::new(2000.0, 100.0), Point2::new(-150.0, 1800.0));
    let image = ImageSize::new(640, 480);
    let p = image.center();
    let f = (-(vh - p).dot(vv - p)).sqrt();
    let k = CameraIntrinsics::new(f, p).unwrap();
    // A 1.5:1 rectangle around the principal point in the true rectified
    // frame, mapped back into the image.
    let h_true = rectification_from_vps(vh, vv, &k).unwrap().h;
    let back = h_true.try_inverse().unwrap();
    let c = apply_homography(&h_true, p).unwrap();
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .map(|(x, y)| apply_homography(&back, c + Point2::new(150.0 * x, 100.0 * y)).unwrap());
    let quad = Quadrangle::new(corners).unwrap();

    let (mut rect, mut rot, mut ar) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut segs = through_image(&mut rng, vh, 10, 1.0);
        segs.extend(through_image(&mut rng, vv, 10, 1.0));
        for _ in 0..2 {
            let a = Point2::new(uniform(&mut rng, 0.0, 640.0), uniform(&mut rng, 0.0, 480.0));
            let b = Point2::new(uniform(&mut rng, 0.0, 640.0), uniform(&mut rng, 0.0, 480.0));
            segs.push(Segment::new(a, b).unwrap());
        }
        let pair = detect(&segs, image, Some(&k), &DetectConfig::default()).unwrap();
        let h = rectification_from_vps(pair.e_h, pair.e_v, &k).unwrap().h;
        let r = evaluate(&quad, 1.5, &h).unwrap();
        rect.push(r.d_rect);
        rot.push(r.d_rot);
        ar.push(r.d_ar);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (m_rect, m_rot, m_ar) = (median(&mut rect), median(&mut rot), median(&mut ar));
    assert!(m_rect < 1.0 && m_rot < 1.5 && m_ar < 0.05, "{m_rect} {m_rot} {m_ar}");
}

#[test]
fn constructed_noise_free_scene() {
    let (vh, vv) = (Point2::new(2000.0, 100.0), Point2::new(-150.0, 1800.0));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut segs = through_image(&mut rng, vh, 10, 0.0);
    segs.extend(through_image(&mut rng, vv, 10, 0.0));
    let pair = detect(&segs, ImageSize::new(640, 480), None, &DetectConfig::default()).unwrap();
    assert!(pair.e_h.distance(vh) < 1e-3, "{:?}", pair.e_h);
    assert!(pair.e_v.distance(vv) < 1e-3, "{:?}", pair.e_v);
}

#[test]
fn optimizer_matches_grid_oracle() {
    let v = Point2::new(500.0, -300.0);
    let t = RobustThreshold::new(4.0).unwrap();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let segs = pencil(&mut rng, v, 10, 0.5);
        let all: Vec<usize> = (0..segs.len()).collect();
        let start = v + Point2::new(3.0, -2.0);
        let m = minimize(|p| robust_cost_and_gradient(p, &segs, &all, t), start, &OptimizerConfig::default());
        let coarse = grid_search_vp(&segs, t, v, 20.0, 0.1);
        let fine = grid_search_vp(&segs, t, coarse, 0.4, 0.002);
        assert!(m.point.distance(fine) < 0.05, "{seed}: {:?} vs {:?}", m.point, fine);
        assert!(m.cost <= robust_cost(fine, &segs, t) + 1e-9);
    }
}

#[test]
fn refinement_matches_grid_oracle() {
    let v = Point2::new(800.0, 600.0);
    let cfg = DetectConfig::default();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let segs = pencil(&mut rng, v, 12, 1.0);
        let cand = VpCandidate::new(v + Point2::new(1.0, 1.0), &segs, cfg.t_d);
        let refined = refine_point(&cand, &segs, &cfg);
        let t = RobustThreshold::new(cfg.t_d).unwrap();
        // Same objective as the refinement: the candidate's inliers only.
        let inl: Vec<Segment> = cand.inliers.iter().map(|&i| segs[i]).collect();
        let coarse = grid_search_vp(&inl, t, v, 40.0, 0.2);
        let fine = grid_search_vp(&inl, t, coarse, 0.8, 0.002);
        assert!(refined.distance(fine) < 0.1, "{seed}: {refined:?} vs {fine:?}");
    }
}

#[test]
fn detection_is_scale_equivariant() {
    let spec = SceneSpec::tilted(30.0, -20.0);
    let (segs, _) = generate(&spec).unwrap();
    let cfg = DetectConfig::default();
    let p = spec.intrinsics.principal;
    let diag = spec.image_size.diagonal();
    let (a, _) = detect_with(&segs, p, diag, &cfg).unwrap();
    let k = 2.0;
    let scaled: Vec<Segment> = segs
        .iter()
        .map(|s| Segment::new(s.p1().scale(k), s.p2().scale(k)).unwrap())
        .collect();
    let cfg2 = DetectConfig {
        t_d: cfg.t_d * k * k,
        ..cfg
    };
    let (b, _) = detect_with(&scaled, p.scale(k), diag * k, &cfg2).unwrap();
    assert!(b.e_h.distance(a.e_h.scale(k)) < 1e-6 * a.e_h.norm() * k);
    assert!(b.e_v.distance(a.e_v.scale(k)) < 1e-6 * a.e_v.norm() * k);
    assert_eq!(a.inliers_h, b.inliers_h);
    assert_eq!(a.inliers_v, b.inliers_v);
}

#[test]
fn true_vanishing_points_give_metric_rectification() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let spec = SceneSpec::tilted(random_tilt(&mut rng), random_tilt(&mut rng));
        let (_, truth) = generate(&spec).unwrap();
        let rect = rectification_from_vps(truth.v_h, truth.v_v, &spec.intrinsics).unwrap();
        assert!((rect.beta - 90.0).abs() < 1e-9);
        let r = evaluate(&truth.quad, truth.aspect, &rect.h).unwrap();
        assert!(r.d_rect < 1e-6, "{r:?}");
        assert!(r.d_ar < 1e-9, "{r:?}");
        assert!(r.d_rot < 1e-6, "{r:?}");
    }
}

#[test]
fn rectification_keeps_clockwise_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let spec = SceneSpec::tilted(random_tilt(&mut rng), random_tilt(&mut rng));
        let (_, truth) = generate(&spec).unwrap();
        let rect = rectification_from_vps(truth.v_h, truth.v_v, &spec.intrinsics).unwrap();
        let mapped: Vec<Point2> = truth
            .quad
            .corners()
            .iter()
            .map(|&c| apply_homography(&rect.h, c).unwrap())
            .collect();
        assert!(signed_area(&mapped) > 0.0);
        assert!(truth.quad.signed_area() > 0.0);
    }
}
