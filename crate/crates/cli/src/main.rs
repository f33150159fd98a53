//! `vprect`: vanishing-point detection, rectification, evaluation and scene
//! synthesis from the command line.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 no valid vanishing-point
//! pair (or another algorithmic failure).

mod commands;
mod error;
mod io;
mod warp;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vprect::{DetectConfig, ImageSize, Point2};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "vprect", version)]
#[command(about = "Orthogonal vanishing points and metric rectification of planar Manhattan objects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect the vanishing-point pair of a segment file.
    Detect {
        #[command(flatten)]
        input: SegmentInput,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect and compute the rectifying homography; optionally warp an image.
    Rectify {
        #[command(flatten)]
        input: SegmentInput,
        #[arg(long = "homography-out")]
        homography_out: PathBuf,
        /// Binary PNM (P5/P6) image to warp.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long = "warp-out")]
        warp_out: Option<PathBuf>,
    },
    /// Score a homography against a ground-truth quadrangle.
    Eval {
        /// Corners x0,y0,...,x3,y3 clockwise from the top-left.
        #[arg(long, allow_hyphen_values = true)]
        quad: String,
        /// Template width/height.
        #[arg(long)]
        aspect: f64,
        #[arg(long)]
        homography: PathBuf,
    },
    /// Generate a synthetic scene: segment CSV plus ground-truth JSON.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct SegmentInput {
    #[arg(long)]
    pub segments: PathBuf,
    /// Image size as WxH.
    #[arg(long = "image-size", value_parser = parse_image_size)]
    pub image_size: ImageSize,
    /// Focal length in pixels; estimated when omitted.
    #[arg(long)]
    pub focal: Option<f64>,
    /// Principal point X,Y; image centre when omitted.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub principal: Option<Point2>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
}

#[derive(Args, Debug, Default)]
pub struct ThresholdArgs {
    /// Inlier threshold T_D (px²).
    #[arg(long = "t-d")]
    pub t_d: Option<f64>,
    /// Length gate as a multiple of the mean segment length.
    #[arg(long = "t-l-factor")]
    pub t_l_factor: Option<f64>,
    /// Duplicate-candidate budget T_s (px).
    #[arg(long = "t-s")]
    pub t_s: Option<f64>,
    /// Principal-point exclusion radius as a fraction of the diagonal.
    #[arg(long = "t-d-factor")]
    pub t_d_factor: Option<f64>,
    /// Lower angle slack T_α¹ (degrees).
    #[arg(long = "t-alpha1")]
    pub t_alpha1: Option<f64>,
    /// Upper angle bound T_α² (degrees).
    #[arg(long = "t-alpha2")]
    pub t_alpha2: Option<f64>,
}

impl ThresholdArgs {
    pub fn config(&self) -> DetectConfig {
        let d = DetectConfig::default();
        DetectConfig {
            t_d: self.t_d.unwrap_or(d.t_d),
            t_l_factor: self.t_l_factor.unwrap_or(d.t_l_factor),
            t_s: self.t_s.or(d.t_s),
            t_d_factor: self.t_d_factor.unwrap_or(d.t_d_factor),
            t_alpha1: self.t_alpha1.unwrap_or(d.t_alpha1),
            t_alpha2: self.t_alpha2.unwrap_or(d.t_alpha2),
            ..d
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON scene spec; replaces the inline flags below.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "truth-out")]
    pub truth_out: PathBuf,
    #[arg(long, default_value_t = 800.0)]
    pub focal: f64,
    /// Plane tilt about the camera x axis (degrees).
    #[arg(long = "tilt-x", default_value_t = 25.0, allow_hyphen_values = true)]
    pub tilt_x: f64,
    /// Plane tilt about the camera y axis (degrees), applied after tilt-x.
    #[arg(long = "tilt-y", default_value_t = 15.0, allow_hyphen_values = true)]
    pub tilt_y: f64,
    #[arg(long = "n-h", default_value_t = 10)]
    pub n_h: usize,
    #[arg(long = "n-v", default_value_t = 10)]
    pub n_v: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Outlier fraction in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    pub outliers: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "image-size", value_parser = parse_image_size, default_value = "640x480")]
    pub image_size: ImageSize,
    #[arg(long, default_value_t = 1.5)]
    pub aspect: f64,
}

fn parse_image_size(s: &str) -> Result<ImageSize, String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("image size must be positive".into());
    }
    Ok(ImageSize::new(w, h))
}

fn parse_point(s: &str) -> Result<Point2, String> {
    let v = parse_numbers(s, 2)?;
    Ok(Point2::new(v[0], v[1]))
}

pub fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected {n} comma-separated numbers, got {s:?}"))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(format!("expected {n} comma-separated finite numbers, got {s:?}"));
    }
    Ok(v)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Detect { input, out } => commands::detect(&input, &out),
        Command::Rectify {
            input,
            homography_out,
            image,
            warp_out,
        } => commands::rectify(&input, &homography_out, image.as_deref(), warp_out.as_deref()),
        Command::Eval {
            quad,
            aspect,
            homography,
        } => commands::eval(&quad, aspect, &homography),
        Command::Synth(args) => commands::synth(&args),
    }
}

fn main() -> ExitCode {
    // clap reports usage errors with status 2, which is reserved here for
    // detection failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vprect: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
