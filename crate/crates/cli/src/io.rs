//! File formats: segment CSV, homography records and binary PNM images.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::pnm::PnmDecoder;
use image::DynamicImage;
use serde::{Deserialize, Serialize};
use vprect::{FocalSource, Mat3, Point2, Segment};

use crate::error::CliError;

/// Reads `x1,y1,x2,y2` rows; a first row of non-numeric column names is
/// treated as a header.
pub fn read_segments(path: &Path) -> Result<Vec<Segment>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_segments(BufReader::new(file), path)
}

pub fn parse_segments<R: Read>(reader: R, path: &Path) -> Result<Vec<Segment>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut segments = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(path, 0, e.to_string()))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if k == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != 4 {
            return Err(CliError::parse(
                path,
                line,
                format!("expected 4 fields x1,y1,x2,y2, found {}", record.len()),
            ));
        }
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field
                .parse::<f64>()
                .map_err(|_| CliError::parse(path, line, format!("not a number: {field:?}")))?;
        }
        let s = Segment::from_coords(v[0], v[1], v[2], v[3])
            .map_err(|e| CliError::parse(path, line, e.to_string()))?;
        segments.push(s);
    }
    Ok(segments)
}

pub fn write_segments(path: &Path, segments: &[Segment]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| CliError::Output(format!("{}: {e}", path.display()));
    w.write_record(["x1", "y1", "x2", "y2"]).map_err(to_err)?;
    for s in segments {
        let (a, b) = (s.p1(), s.p2());
        w.write_record([a.x, a.y, b.x, b.y].map(|x| x.to_string()))
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpInfo {
    pub width: u32,
    pub height: u32,
    /// Uniform scale applied to the rectified plane to respect the canvas
    /// area limit (1 when not needed).
    pub scale: f64,
    /// Rectified-plane coordinates of the canvas origin.
    pub offset: Point2,
    /// Full source-to-canvas homography, row-major.
    pub canvas_homography: [f64; 9],
}

/// Detection/rectification result as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomographyRecord {
    /// Rectifying homography, row-major.
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<[f64; 9]>,
    pub f_used: f64,
    pub f_source: FocalSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_estimated: Option<f64>,
    pub principal: Point2,
    pub v_h: Point2,
    pub v_v: Point2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub inliers_h: usize,
    pub inliers_v: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp: Option<WarpInfo>,
}

pub fn mat_to_array(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = m[(r, c)];
        }
    }
    out
}

pub fn mat_from_array(a: &[f64; 9]) -> Mat3 {
    Mat3::from_row_slice(a)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Loads a homography from a JSON file holding either `"H"` (9 numbers or
/// 3 rows) or `"H_true"` as written by `synth --truth-out`.
pub fn read_homography(path: &Path) -> Result<Mat3, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line() as u64, e.to_string()))?;
    let field = value
        .get("H")
        .or_else(|| value.get("H_true"))
        .ok_or_else(|| CliError::parse(path, 0, "no \"H\" or \"H_true\" field".into()))?;
    let flat: Vec<f64> = match field {
        serde_json::Value::Array(items) if items.iter().all(|x| x.is_array()) => items
            .iter()
            .flat_map(|row| row.as_array().into_iter().flatten())
            .filter_map(serde_json::Value::as_f64)
            .collect(),
        serde_json::Value::Array(items) => items.iter().filter_map(serde_json::Value::as_f64).collect(),
        _ => Vec::new(),
    };
    let arr: [f64; 9] = flat
        .try_into()
        .map_err(|_| CliError::parse(path, 0, "homography must have 9 numeric entries".into()))?;
    Ok(mat_from_array(&arr))
}

/// Decoded binary PNM raster, 8 bits per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: Vec<u8>,
}

pub fn read_pnm(path: &Path) -> Result<Raster, CliError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    let unsupported = |why: &str| CliError::UnsupportedImage(format!("{}: {why}", path.display()));
    match bytes.get(..2) {
        Some(b"P5") | Some(b"P6") => {}
        _ => return Err(unsupported("only binary PNM (P5/P6) is supported")),
    }
    let decoder = PnmDecoder::new(std::io::Cursor::new(&bytes)).map_err(|e| unsupported(&e.to_string()))?;
    let img = DynamicImage::from_decoder(decoder).map_err(|e| unsupported(&e.to_string()))?;
    match img {
        DynamicImage::ImageLuma8(g) => Ok(Raster {
            width: g.width(),
            height: g.height(),
            channels: 1,
            data: g.into_raw(),
        }),
        DynamicImage::ImageRgb8(c) => Ok(Raster {
            width: c.width(),
            height: c.height(),
            channels: 3,
            data: c.into_raw(),
        }),
        _ => Err(unsupported("maximum sample value must be 255")),
    }
}

/// Writes a binary PNM with the canonical header `P5|P6\nW H\n255\n`.
pub fn write_pnm(path: &Path, raster: &Raster) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let magic = if raster.channels == 1 { "P5" } else { "P6" };
    write!(out, "{magic}\n{} {}\n255\n", raster.width, raster.height)
        .and_then(|_| out.write_all(&raster.data))
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Segment>, CliError> {
        parse_segments(text.as_bytes(), Path::new("test.csv"))
    }

    #[test]
    fn header_is_optional() {
        let a = parse("x1,y1,x2,y2\n0,0,1,0\n2,2,3,5\n").unwrap();
        let b = parse("0,0,1,0\n2,2,3,5\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn malformed_row_names_line() {
        let err = parse("x1,y1,x2,y2\n0,0,1,0\n1,2,three,4\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert_eq!(err.exit_code(), 1);
        assert!(parse("0,0,0,0\n").is_err());
        assert!(parse("0,0,1\n").is_err());
    }

    #[test]
    fn homography_arrays() {
        let m = Mat3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0);
        assert_eq!(mat_from_array(&mat_to_array(&m)), m);
    }
}
