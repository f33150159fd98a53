use std::path::Path;

use serde::Serialize;
use vprect::geom::GeomError;
use vprect::metrics::evaluate;
use vprect::rectify::{focal_for_rectification, rectify_pair};
use vprect::synth::{generate, tilt_rotation, SceneSpec};
use vprect::vp_detect::{detect_with, estimate_focal};
use vprect::{CameraIntrinsics, Point2, Quadrangle, Segment, VpPair};

use crate::error::CliError;
use crate::io::{
    mat_to_array, read_homography, read_pnm, read_segments, write_json, write_pnm, write_segments,
    HomographyRecord, WarpInfo,
};
use crate::warp::{fit_canvas, warp};
use crate::{parse_numbers, SegmentInput, SynthArgs};

struct Detection {
    pair: VpPair,
    principal: Point2,
}

fn run_detection(input: &SegmentInput) -> Result<Detection, CliError> {
    if let Some(f) = input.focal {
        if !(f > 0.0 && f.is_finite()) {
            return Err(CliError::Usage(format!("--focal must be positive, got {f}")));
        }
    }
    let cfg = input.thresholds.config();
    cfg.validate()?;
    let segments: Vec<Segment> = read_segments(&input.segments)?;
    let principal = input.principal.unwrap_or_else(|| input.image_size.center());
    let (mut pair, _) = detect_with(&segments, principal, input.image_size.diagonal(), &cfg)?;
    if input.focal.is_none() {
        pair.f_estimated = estimate_focal(pair.e_h, pair.e_v, principal).ok();
    }
    Ok(Detection { pair, principal })
}

fn base_record(input: &SegmentInput, det: &Detection) -> HomographyRecord {
    let (f_used, f_source) = focal_for_rectification(&det.pair, input.focal, input.image_size);
    HomographyRecord {
        h: None,
        f_used,
        f_source,
        f_estimated: det.pair.f_estimated,
        principal: det.principal,
        v_h: det.pair.e_h,
        v_v: det.pair.e_v,
        beta: None,
        inliers_h: det.pair.inliers_h.len(),
        inliers_v: det.pair.inliers_v.len(),
        warp: None,
    }
}

pub fn detect(input: &SegmentInput, out: &Path) -> Result<(), CliError> {
    let det = run_detection(input)?;
    write_json(out, &base_record(input, &det))
}

pub fn rectify(
    input: &SegmentInput,
    homography_out: &Path,
    image: Option<&Path>,
    warp_out: Option<&Path>,
) -> Result<(), CliError> {
    let warp_io = match (image, warp_out) {
        (Some(i), Some(o)) => Some((i, o)),
        (None, None) => None,
        (None, Some(_)) => return Err(CliError::Usage("--warp-out requires --image".into())),
        (Some(_), None) => return Err(CliError::Usage("--image requires --warp-out".into())),
    };
    // Fail on an unreadable image before doing any work.
    let raster = warp_io.map(|(i, _)| read_pnm(i)).transpose()?;

    let det = run_detection(input)?;
    let rect = rectify_pair(&det.pair, input.focal, det.principal, input.image_size)?;
    let mut record = base_record(input, &det);
    record.h = Some(mat_to_array(&rect.h));
    record.beta = Some(rect.beta);

    if let (Some(raster), Some((_, out))) = (raster, warp_io) {
        let canvas = fit_canvas(&rect.h, raster.width, raster.height)?;
        let warped = warp(&raster, &canvas)?;
        write_pnm(out, &warped)?;
        record.warp = Some(WarpInfo {
            width: canvas.width,
            height: canvas.height,
            scale: canvas.scale,
            offset: canvas.offset,
            canvas_homography: mat_to_array(&canvas.homography),
        });
    }
    write_json(homography_out, &record)
}

#[derive(Serialize)]
struct EvalOutput {
    d_rect: f64,
    d_rot: f64,
    /// Percent.
    d_ar: f64,
}

pub fn eval(quad: &str, aspect: f64, homography: &Path) -> Result<(), CliError> {
    let v = parse_numbers(quad, 8).map_err(CliError::Usage)?;
    let corners = [
        Point2::new(v[0], v[1]),
        Point2::new(v[2], v[3]),
        Point2::new(v[4], v[5]),
        Point2::new(v[6], v[7]),
    ];
    let quad = Quadrangle::new(corners).map_err(|e| match e {
        GeomError::DegenerateQuadrangle => CliError::Usage(
            "--quad must be a simple quadrangle listed clockwise from the top-left corner".into(),
        ),
        other => CliError::Usage(format!("--quad: {other}")),
    })?;
    if !(aspect > 0.0 && aspect.is_finite()) {
        return Err(CliError::Usage(format!("--aspect must be positive, got {aspect}")));
    }
    let h = read_homography(homography)?;
    let report = evaluate(&quad, aspect, &h)?;
    let out = EvalOutput {
        d_rect: report.d_rect,
        d_rot: report.d_rot,
        d_ar: 100.0 * report.d_ar,
    };
    println!(
        "{}",
        serde_json::to_string(&out).map_err(|e| CliError::Output(e.to_string()))?
    );
    Ok(())
}

fn inline_spec(args: &SynthArgs) -> Result<SceneSpec, CliError> {
    let intrinsics = CameraIntrinsics::new(args.focal, args.image_size.center())
        .map_err(|e| CliError::Usage(format!("--focal: {e}")))?;
    Ok(SceneSpec {
        intrinsics,
        plane_rotation: tilt_rotation(args.tilt_x, args.tilt_y),
        grid: (args.n_h, args.n_v),
        sigma: args.sigma,
        outlier_fraction: args.outliers,
        seed: args.seed,
        image_size: args.image_size,
        aspect: args.aspect,
    })
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::parse(path, e.line() as u64, e.to_string()))?
        }
        None => inline_spec(args)?,
    };
    let (segments, truth) = generate(&spec)?;
    write_segments(&args.out, &segments)?;
    write_json(&args.truth_out, &truth)
}
