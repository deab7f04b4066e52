//! File formats: binary PGM images, operator files and mask files.
//!
//! Operator file layout (all integers little-endian `u32`):
//!
//! ```text
//! "GOALOP1"  n  k  patch_side  k·n f64 (little-endian, row-major)
//! ```
//!
//! Mask files are text: a header line `h w` followed by `h·w` flags
//! (`0` = missing, `1` = observed) in row-major order.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::objective::AnalysisOperator;
use crate::patches::Image;

pub const OPERATOR_MAGIC: &[u8; 7] = b"GOALOP1";

/// Row-norm tolerance applied when loading operators.
pub const OPERATOR_ROW_TOL: f64 = 1e-8;

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a binary (`P5`) 8-bit PGM.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            pos += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "header is not ASCII")?);
    }
    if fields[0] != "P5" {
        return Err(format!("unsupported magic {:?}, expected P5", fields[0]));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} {s:?}"));
    let width = num(fields[1], "width")?;
    let height = num(fields[2], "height")?;
    let maxval = num(fields[3], "maxval")?;
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported, only 8-bit (255) images are read"));
    }
    if width == 0 || height == 0 {
        return Err("empty image".into());
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err("truncated header".into());
    }
    pos += 1;
    let raster = &bytes[pos..];
    if raster.len() < width * height {
        return Err(format!("raster has {} bytes, expected {}", raster.len(), width * height));
    }
    let pixels = Array2::from_shape_fn((height, width), |(r, c)| f64::from(raster[r * width + c]));
    Ok(Image::from_raw(pixels))
}

/// Encodes as `P5` after clamping to `[0, 255]` and rounding.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let (h, w) = img.dims();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(img.view().iter().map(|&v| to_u8(v)));
    out
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    decode_pgm(&read_bytes(path)?).map_err(|m| format_err(path, m))
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    write_bytes(path, &encode_pgm(img))
}

#[cfg(feature = "png")]
fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Reads a PGM, or a PNG (converted to 8-bit gray) when the `png` feature is
/// enabled and the extension is `.png`.
pub fn read_image(path: &Path) -> Result<Image> {
    #[cfg(feature = "png")]
    if is_png(path) {
        let img = image::open(path).map_err(|e| format_err(path, e.to_string()))?.into_luma8();
        let (w, h) = img.dimensions();
        let pixels = Array2::from_shape_fn((h as usize, w as usize), |(r, c)| f64::from(img.get_pixel(c as u32, r as u32)[0]));
        return Image::new(pixels);
    }
    read_pgm(path)
}

/// Counterpart of [`read_image`].
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    #[cfg(feature = "png")]
    if is_png(path) {
        let (h, w) = img.dims();
        let buf = image::GrayImage::from_fn(w as u32, h as u32, |c, r| image::Luma([to_u8(img.view()[[r as usize, c as usize]])]));
        return buf.save(path).map_err(|e| format_err(path, e.to_string()));
    }
    write_pgm(path, img)
}

pub fn encode_operator(op: &AnalysisOperator) -> Vec<u8> {
    let (k, n) = op.view().dim();
    let mut out = Vec::with_capacity(7 + 12 + 8 * k * n);
    out.extend_from_slice(OPERATOR_MAGIC);
    for v in [n, k, op.patch_side()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &v in op.view().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_operator(bytes: &[u8]) -> std::result::Result<AnalysisOperator, String> {
    let header = OPERATOR_MAGIC.len() + 12;
    if bytes.len() < header || &bytes[..7] != OPERATOR_MAGIC {
        return Err("not an operator file".into());
    }
    let word = |i: usize| {
        let off = 7 + 4 * i;
        u32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes")) as usize
    };
    let (n, k, side) = (word(0), word(1), word(2));
    if side * side != n || n == 0 {
        return Err(format!("patch side {side} does not match dimension {n}"));
    }
    if k < n {
        return Err(format!("operator has {k} rows, fewer than its dimension {n}"));
    }
    let payload = &bytes[header..];
    if payload.len() != 8 * k * n {
        return Err(format!("payload has {} bytes, expected {}", payload.len(), 8 * k * n));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let data = Array2::from_shape_vec((k, n), values).expect("length checked");
    AnalysisOperator::with_tolerance(data, side, OPERATOR_ROW_TOL).map_err(|e| e.to_string())
}

pub fn read_operator(path: &Path) -> Result<AnalysisOperator> {
    decode_operator(&read_bytes(path)?).map_err(|m| format_err(path, m))
}

pub fn write_operator(path: &Path, op: &AnalysisOperator) -> Result<()> {
    write_bytes(path, &encode_operator(op))
}

/// Parses a mask file into an `h × w` array, `true` = observed.
pub fn decode_mask(text: &str) -> std::result::Result<Array2<bool>, String> {
    let mut tokens = text.split_ascii_whitespace();
    let mut dim = |what| {
        tokens
            .next()
            .ok_or(format!("missing {what}"))?
            .parse::<usize>()
            .map_err(|_| format!("bad {what}"))
    };
    let h = dim("height")?;
    let w = dim("width")?;
    let flags: Vec<bool> = tokens
        .map(|t| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(format!("mask flag {other:?} is not 0 or 1")),
        })
        .collect::<std::result::Result<_, _>>()?;
    if flags.len() != h * w {
        return Err(format!("mask has {} flags, header says {h}x{w}", flags.len()));
    }
    Ok(Array2::from_shape_vec((h, w), flags).expect("length checked"))
}

pub fn encode_mask(mask: &Array2<bool>) -> String {
    let (h, w) = mask.dim();
    let mut out = format!("{h} {w}\n");
    for row in mask.rows() {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_mask(path: &Path) -> Result<Array2<bool>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_mask(&text).map_err(|m| format_err(path, m))
}

pub fn write_mask(path: &Path, mask: &Array2<bool>) -> Result<()> {
    write_bytes(path, encode_mask(mask).as_bytes())
}
