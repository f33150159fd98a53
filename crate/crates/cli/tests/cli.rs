use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn vprect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vprect"))
        .args(args)
        .output()
        .expect("run vprect")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn point(v: &Value) -> (f64, f64) {
    (v["x"].as_f64().unwrap(), v["y"].as_f64().unwrap())
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Generates a scene in `dir` and returns (segments, truth) paths.
fn synth(dir: &TempDir, extra: &[&str]) -> (PathBuf, PathBuf) {
    let seg = dir.path().join("segments.csv");
    let truth = dir.path().join("truth.json");
    let mut args = vec!["synth", "--out", path_str(&seg), "--truth-out", path_str(&truth)];
    args.extend_from_slice(extra);
    let out = vprect(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (seg, truth)
}

/// Binary P5 image with a deterministic texture.
fn write_p5(path: &Path, w: usize, h: usize) {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend((0..w * h).map(|k| ((k * 37 + k / w * 11) % 251) as u8));
    std::fs::write(path, bytes).unwrap();
}

fn quad_corners(truth: &Value) -> Vec<(f64, f64)> {
    let q = &truth["quad"];
    let list = q.get("corners").unwrap_or(q);
    list.as_array().unwrap().iter().map(point).collect()
}

fn quad_arg(corners: &[(f64, f64)]) -> String {
    corners
        .iter()
        .flat_map(|&(x, y)| [x.to_string(), y.to_string()])
        .collect::<Vec<_>>()
        .join(",")
}

#[test]
fn detect_recovers_synthetic_vanishing_points() {
    let dir = TempDir::new().unwrap();
    let (seg, truth) = synth(&dir, &["--tilt-x", "30", "--tilt-y", "-20"]);
    let out_json = dir.path().join("vp.json");
    let out = vprect(&[
        "detect",
        "--segments",
        path_str(&seg),
        "--image-size",
        "640x480",
        "--focal",
        "800",
        "--out",
        path_str(&out_json),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = read_json(&out_json);
    let truth = read_json(&truth);
    assert!(dist(point(&rec["v_h"]), point(&truth["v_h"])) < 1e-3);
    assert!(dist(point(&rec["v_v"]), point(&truth["v_v"])) < 1e-3);
    assert!(rec.get("H").is_none());
    assert_eq!(rec["f_source"], "provided");
}

#[test]
fn too_few_segments_exit_2() {
    let dir = TempDir::new().unwrap();
    let seg = dir.path().join("s.csv");
    std::fs::write(&seg, "0,0,10,0\n0,5,10,6\n3,0,4,9\n").unwrap();
    let out = vprect(&[
        "detect",
        "--segments",
        path_str(&seg),
        "--image-size",
        "640x480",
        "--out",
        path_str(&dir.path().join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gate"));
}

#[test]
fn malformed_row_exit_1_with_line() {
    let dir = TempDir::new().unwrap();
    let seg = dir.path().join("s.csv");
    std::fs::write(&seg, "x1,y1,x2,y2\n0,0,10,0\n1,2,three,4\n").unwrap();
    let out = vprect(&[
        "detect",
        "--segments",
        path_str(&seg),
        "--image-size",
        "640x480",
        "--out",
        path_str(&dir.path().join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn bad_flags_exit_1() {
    let out = vprect(&["detect", "--image-size", "640x480"]);
    assert_eq!(out.status.code(), Some(1));
    let out = vprect(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

fn eval(dir: &TempDir, quad: &str, aspect: &str, h: &str) -> Output {
    let hp = dir.path().join("h.json");
    std::fs::write(&hp, h).unwrap();
    vprect(&["eval", "--quad", quad, "--aspect", aspect, "--homography", path_str(&hp)])
}

#[test]
fn eval_identity_is_zero() {
    let dir = TempDir::new().unwrap();
    let out = eval(&dir, "0,0,2,0,2,1,0,1", "2", r#"{"H":[1,0,0,0,1,0,0,0,1]}"#);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["d_rect", "d_rot", "d_ar"] {
        assert_eq!(v[k].as_f64(), Some(0.0), "{k}");
    }
}

#[test]
fn eval_rotation_and_stretch() {
    let dir = TempDir::new().unwrap();
    let (s, c) = 3f64.to_radians().sin_cos();
    let h = format!(r#"{{"H":[{c},{},0,{s},{c},0,0,0,1]}}"#, -s);
    let out = eval(&dir, "0,0,2,0,2,1,0,1", "2", &h);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["d_rot"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    let out = eval(&dir, "0,0,2,0,2,1,0,1", "2", r#"{"H":[[1.1,0,0],[0,1,0],[0,0,1]]}"#);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["d_ar"].as_f64().unwrap() - 10.0).abs() < 1e-9);
}

#[test]
fn eval_self_intersecting_exit_1() {
    let dir = TempDir::new().unwrap();
    let out = eval(&dir, "0,0,2,1,2,0,0,1", "2", r#"{"H":[1,0,0,0,1,0,0,0,1]}"#);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--sigma", "1", "--outliers", "0.2", "--seed", "42"];
    let (sa, ta) = synth(&a, &args);
    let (sb, tb) = synth(&b, &args);
    assert_eq!(std::fs::read(sa).unwrap(), std::fs::read(sb).unwrap());
    assert_eq!(std::fs::read(ta).unwrap(), std::fs::read(tb).unwrap());
}

#[test]
fn synth_fronto_parallel_exit_1() {
    let dir = TempDir::new().unwrap();
    let out = vprect(&[
        "synth",
        "--tilt-x",
        "0",
        "--tilt-y",
        "0",
        "--out",
        path_str(&dir.path().join("s.csv")),
        "--truth-out",
        path_str(&dir.path().join("t.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vanishing point at infinity"));
}

#[test]
fn synth_spec_file_matches_inline_flags() {
    let dir = TempDir::new().unwrap();
    let (seg_inline, _) = synth(&dir, &["--seed", "7", "--sigma", "0.5"]);
    let inline = std::fs::read(&seg_inline).unwrap();
    let spec = dir.path().join("spec.json");
    let r = {
        // Same rotation as --tilt-x 25 --tilt-y 15.
        let (sx, cx) = 25f64.to_radians().sin_cos();
        let (sy, cy) = 15f64.to_radians().sin_cos();
        [[cy, sy * sx, sy * cx], [0.0, cx, -sx], [-sy, cy * sx, cy * cx]]
    };
    let text = serde_json::json!({
        "intrinsics": {"f": 800.0, "principal": {"x": 320.0, "y": 240.0}},
        "plane_rotation": r,
        "grid": [10, 10],
        "sigma": 0.5,
        "outlier_fraction": 0.0,
        "seed": 7,
        "image_size": {"width": 640, "height": 480}
    });
    std::fs::write(&spec, text.to_string()).unwrap();
    let seg = dir.path().join("from_spec.csv");
    let out = vprect(&[
        "synth",
        "--spec",
        path_str(&spec),
        "--out",
        path_str(&seg),
        "--truth-out",
        path_str(&dir.path().join("t2.json")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let from_spec = std::fs::read_to_string(&seg).unwrap();
    let inline = String::from_utf8(inline).unwrap();
    // Rotation entries may differ in the last bit.
    let nums = |s: &str| -> Vec<f64> {
        s.lines()
            .skip(1)
            .flat_map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .collect()
    };
    let (a, b) = (nums(&inline), nums(&from_spec));
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-6));
}

#[test]
fn synth_truth_evaluates_to_zero() {
    let dir = TempDir::new().unwrap();
    let (_, truth_path) = synth(&dir, &["--tilt-x", "-20", "--tilt-y", "35", "--aspect", "1.4142"]);
    let truth = read_json(&truth_path);
    let out = vprect(&[
        "eval",
        "--quad",
        &quad_arg(&quad_corners(&truth)),
        "--aspect",
        "1.4142",
        "--homography",
        path_str(&truth_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["d_rect", "d_rot", "d_ar"] {
        assert!(v[k].as_f64().unwrap() < 1e-9, "{k}: {v}");
    }
}

#[test]
fn warp_out_without_image_exit_1() {
    let dir = TempDir::new().unwrap();
    let (seg, _) = synth(&dir, &[]);
    let out = vprect(&[
        "rectify",
        "--segments",
        path_str(&seg),
        "--image-size",
        "640x480",
        "--homography-out",
        path_str(&dir.path().join("h.json")),
        "--warp-out",
        path_str(&dir.path().join("w.pnm")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ascii_pnm_is_unsupported() {
    let dir = TempDir::new().unwrap();
    let (seg, _) = synth(&dir, &[]);
    let img = dir.path().join("a.pgm");
    std::fs::write(&img, "P2\n2 2\n255\n0 1 2 3\n").unwrap();
    let out = vprect(&[
        "rectify",
        "--segments",
        path_str(&seg),
        "--image-size",
        "640x480",
        "--homography-out",
        path_str(&dir.path().join("h.json")),
        "--image",
        path_str(&img),
        "--warp-out",
        path_str(&dir.path().join("w.pnm")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

fn rectify_with_warp(dir: &TempDir, seg: &Path, extra: &[&str]) -> (Value, PathBuf) {
    let img = dir.path().join("in.pgm");
    write_p5(&img, 640, 480);
    let h = dir.path().join("h.json");
    let warped = dir.path().join("out.pgm");
    let mut args = vec![
        "rectify",
        "--segments",
        path_str(seg),
        "--image-size",
        "640x480",
        "--homography-out",
        path_str(&h),
        "--image",
        path_str(&img),
        "--warp-out",
        path_str(&warped),
    ];
    args.extend_from_slice(extra);
    let out = vprect(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (read_json(&h), warped)
}

#[test]
fn nearly_fronto_parallel_warp_is_bit_exact() {
    let dir = TempDir::new().unwrap();
    let (seg, _) = synth(&dir, &["--tilt-x", "0.0001", "--tilt-y", "0.0001"]);
    let (rec, warped) = rectify_with_warp(&dir, &seg, &["--focal", "800"]);
    let w = &rec["warp"];
    assert_eq!((w["width"].as_u64(), w["height"].as_u64()), (Some(640), Some(480)), "{rec}");
    assert_eq!(
        std::fs::read(&warped).unwrap(),
        std::fs::read(dir.path().join("in.pgm")).unwrap()
    );
}

#[test]
fn warped_quad_is_rectangle() {
    let dir = TempDir::new().unwrap();
    let (seg, truth_path) = synth(&dir, &["--tilt-x", "30", "--tilt-y", "20"]);
    let (rec, warped) = rectify_with_warp(&dir, &seg, &["--focal", "800"]);
    assert!(std::fs::metadata(&warped).unwrap().len() > 0);
    let g: Vec<f64> = rec["warp"]["canvas_homography"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let map = |(x, y): (f64, f64)| {
        let w = g[6] * x + g[7] * y + g[8];
        ((g[0] * x + g[1] * y + g[2]) / w, (g[3] * x + g[4] * y + g[5]) / w)
    };
    let c: Vec<(f64, f64)> = quad_corners(&read_json(&truth_path)).into_iter().map(map).collect();
    // A parallelogram with equal diagonals is a rectangle.
    let mid = |a: (f64, f64), b: (f64, f64)| ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    assert!(dist(mid(c[0], c[2]), mid(c[1], c[3])) < 0.5, "{c:?}");
    assert!((dist(c[0], c[2]) - dist(c[1], c[3])).abs() < 0.5, "{c:?}");
}

#[test]
fn rectify_is_byte_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (sa, _) = synth(&a, &["--sigma", "1", "--outliers", "0.1", "--seed", "3"]);
    let (sb, _) = synth(&b, &["--sigma", "1", "--outliers", "0.1", "--seed", "3"]);
    let (_, wa) = rectify_with_warp(&a, &sa, &[]);
    let (_, wb) = rectify_with_warp(&b, &sb, &[]);
    assert_eq!(std::fs::read(&wa).unwrap(), std::fs::read(&wb).unwrap());
    assert_eq!(
        std::fs::read(a.path().join("h.json")).unwrap(),
        std::fs::read(b.path().join("h.json")).unwrap()
    );
}

#[test]
fn homography_record_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let (seg, _) = synth(&dir, &["--sigma", "0.7", "--seed", "9"]);
    let (rec, _) = rectify_with_warp(&dir, &seg, &[]);
    let h: Vec<f64> = rec["H"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for x in &h {
        assert_eq!(x.to_string().parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
    assert_eq!(rec["f_source"], "estimated");
}
