//! Inverse-mapping warp with bilinear interpolation.

use vprect::geom::EPS_W;
use vprect::{Mat3, Point2, Vec3};

use crate::error::CliError;
use crate::io::Raster;

/// Canvas area limit relative to the source image area.
pub const MAX_AREA_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
    pub scale: f64,
    pub offset: Point2,
    /// Source pixel → canvas pixel.
    pub homography: Mat3,
}

/// Fits a canvas around the image of the source rectangle
/// `[0, W−1] × [0, H−1]` under `h`, shrinking uniformly when the area would
/// exceed [`MAX_AREA_FACTOR`] times the source area.
pub fn fit_canvas(h: &Mat3, width: u32, height: u32) -> Result<Canvas, CliError> {
    let (w, ht) = ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64);
    let corners = [(0.0, 0.0), (w, 0.0), (w, ht), (0.0, ht)];
    let mapped: Vec<Vec3> = corners.iter().map(|&(x, y)| h * Vec3::new(x, y, 1.0)).collect();
    let sign = mapped[0].z.signum();
    if mapped.iter().any(|m| m.z.abs() < EPS_W || m.z.signum() != sign) {
        return Err(CliError::Canvas(
            "the source image crosses the vanishing line of the rectified plane".into(),
        ));
    }
    let pts: Vec<Point2> = mapped.iter().map(|m| Point2::new(m.x / m.z, m.y / m.z)).collect();
    let min_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let min_y = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_x = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let max_y = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let (span_x, span_y) = (max_x - min_x, max_y - min_y);
    let limit = MAX_AREA_FACTOR * width as f64 * height as f64;
    let area = (span_x + 1.0) * (span_y + 1.0);
    let scale = if area > limit {
        // Largest s with (s·span_x + 1)(s·span_y + 1) ≤ limit.
        let (p, q) = (span_x * span_y, span_x + span_y);
        if p > 0.0 {
            (-q + (q * q + 4.0 * p * (limit - 1.0)).sqrt()) / (2.0 * p)
        } else {
            (limit - 1.0) / q
        }
    } else {
        1.0
    };
    let offset = Point2::new(min_x, min_y);
    let cw = (scale * span_x).floor() as u32 + 1;
    let ch = (scale * span_y).floor() as u32 + 1;
    let to_canvas = Mat3::new(
        scale,
        0.0,
        -scale * offset.x,
        0.0,
        scale,
        -scale * offset.y,
        0.0,
        0.0,
        1.0,
    );
    Ok(Canvas {
        width: cw,
        height: ch,
        scale,
        offset,
        homography: to_canvas * h,
    })
}

/// Bilinear sample at `(x, y)`. Each pixel covers ±0.5 around its centre,
/// so points up to half a pixel outside the centre grid clamp to the edge;
/// anything further out is rejected.
fn sample(src: &Raster, x: f64, y: f64, out: &mut [u8]) -> bool {
    let (w, h) = (src.width as usize, src.height as usize);
    let (xmax, ymax) = ((w - 1) as f64, (h - 1) as f64);
    if !(x >= -0.5 && y >= -0.5 && x < xmax + 0.5 && y < ymax + 0.5) {
        return false;
    }
    let (x, y) = (x.clamp(0.0, xmax), y.clamp(0.0, ymax));
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let ch = src.channels as usize;
    let px = |xx: usize, yy: usize, c: usize| src.data[(yy * w + xx) * ch + c] as f64;
    for (c, o) in out.iter_mut().enumerate().take(ch) {
        let top = px(x0, y0, c) * (1.0 - fx) + px(x1, y0, c) * fx;
        let bottom = px(x0, y1, c) * (1.0 - fx) + px(x1, y1, c) * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        *o = v.round().clamp(0.0, 255.0) as u8;
    }
    true
}

/// Renders `src` onto `canvas`; pixels with no source are black.
pub fn warp(src: &Raster, canvas: &Canvas) -> Result<Raster, CliError> {
    let inv = canvas
        .homography
        .try_inverse()
        .ok_or_else(|| CliError::Canvas("homography is singular".into()))?;
    let ch = src.channels as usize;
    let mut data = vec![0u8; canvas.width as usize * canvas.height as usize * ch];
    for j in 0..canvas.height as usize {
        for i in 0..canvas.width as usize {
            let s = inv * Vec3::new(i as f64, j as f64, 1.0);
            if s.z.abs() < EPS_W {
                continue;
            }
            let base = (j * canvas.width as usize + i) * ch;
            sample(src, s.x / s.z, s.y / s.z, &mut data[base..base + ch]);
        }
    }
    Ok(Raster {
        width: canvas.width,
        height: canvas.height,
        channels: src.channels,
        data,
    })
}
