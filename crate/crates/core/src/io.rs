//! PPM (P6), PGM (P5) masks and PFM images.
//!
//! PPM output is 8-bit with values clamped to [0, 1]; readers accept maxval
//! up to 65535. PFM is little-endian (scale −1) with rows stored bottom to top.

use std::fs;
use std::path::Path;

use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::real::Real;

fn format_err(format: &'static str, message: impl Into<String>) -> Error {
    Error::Format { format, message: message.into() }
}

fn quantize<T: Real>(v: T) -> u8 {
    (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm<T: Real>(img: &Image<T>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len() * 3);
    for p in img.pixels() {
        out.extend(p.iter().map(|&v| quantize(v)));
    }
    out
}

/// Splits a netpbm header of `fields` numbers after the magic, returning the
/// numbers and the offset of the raster.
fn parse_header(bytes: &[u8], magic: &[u8], fields: usize, format: &'static str) -> Result<(Vec<u64>, usize)> {
    if !bytes.starts_with(magic) {
        return Err(format_err(format, format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    let mut pos = magic.len();
    let mut values = Vec::with_capacity(fields);
    while values.len() < fields {
        let b = *bytes.get(pos).ok_or_else(|| format_err(format, "truncated header"))?;
        if b == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            pos += 1;
        } else if b.is_ascii_digit() {
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
            values.push(text.parse().map_err(|_| format_err(format, format!("bad header number {text}")))?);
        } else {
            return Err(format_err(format, format!("unexpected byte 0x{b:02x} in header")));
        }
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok((values, pos + 1)),
        _ => Err(format_err(format, "header must end with one whitespace byte")),
    }
}

fn samples(raster: &[u8], count: usize, maxval: u64, format: &'static str) -> Result<Vec<f64>> {
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(format, format!("maxval {maxval} outside 1..=65535")));
    }
    let wide = maxval > 255;
    let need = count * if wide { 2 } else { 1 };
    if raster.len() < need {
        return Err(format_err(format, format!("raster has {} bytes, expected {need}", raster.len())));
    }
    let scale = maxval as f64;
    Ok(if wide {
        raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale).collect()
    } else {
        raster[..need].iter().map(|&b| b as f64 / scale).collect()
    })
}

fn checked_dims(w: u64, h: u64, format: &'static str) -> Result<(u32, u32)> {
    match (u32::try_from(w), u32::try_from(h)) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 && (w as u64) * (h as u64) <= 1 << 28 => Ok((w, h)),
        _ => Err(format_err(format, format!("unsupported size {w}x{h}"))),
    }
}

pub fn decode_ppm<T: Real>(bytes: &[u8]) -> Result<Image<T>> {
    let (hdr, off) = parse_header(bytes, b"P6", 3, "ppm")?;
    let (w, h) = checked_dims(hdr[0], hdr[1], "ppm")?;
    let vals = samples(&bytes[off..], w as usize * h as usize * 3, hdr[2], "ppm")?;
    let data = vals.chunks_exact(3).map(|c| [T::lit(c[0]), T::lit(c[1]), T::lit(c[2])]).collect();
    Image::from_raw(w, h, data)
}

/// Observed mask as 8-bit PGM: 255 observed, 0 unobserved.
pub fn encode_pgm_mask(mask: &[bool], width: u32, height: u32) -> Result<Vec<u8>> {
    if mask.len() != width as usize * height as usize {
        return Err(Error::DimensionMismatch(format!("mask of {} entries for {width}x{height}", mask.len())));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(mask.iter().map(|&m| if m { 255u8 } else { 0 }));
    Ok(out)
}

/// Any nonzero sample reads as observed.
pub fn decode_pgm_mask(bytes: &[u8]) -> Result<(u32, u32, Vec<bool>)> {
    let (hdr, off) = parse_header(bytes, b"P5", 3, "pgm")?;
    let (w, h) = checked_dims(hdr[0], hdr[1], "pgm")?;
    let vals = samples(&bytes[off..], w as usize * h as usize, hdr[2], "pgm")?;
    Ok((w, h, vals.into_iter().map(|v| v > 0.0).collect()))
}

pub fn encode_pfm<T: Real>(img: &Image<T>) -> Vec<u8> {
    let mut out = format!("PF\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    for y in (0..img.height()).rev() {
        for x in 0..img.width() {
            for v in img.get(x, y) {
                out.extend((v.as_f64() as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_pfm<T: Real>(bytes: &[u8]) -> Result<Image<T>> {
    // Three newline-terminated header lines.
    let mut lines = Vec::new();
    let mut pos = 0;
    while lines.len() < 3 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| format_err("pfm", "truncated header"))?;
        lines.push(std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| format_err("pfm", "non-utf8 header"))?);
        pos += end + 1;
    }
    if lines[0].trim() != "PF" {
        return Err(format_err("pfm", format!("expected colour PF magic, got {:?}", lines[0])));
    }
    let dims: Vec<u64> = lines[1]
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| format_err("pfm", format!("bad size {:?}", lines[1]))))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(format_err("pfm", format!("bad size line {:?}", lines[1])));
    }
    let (w, h) = checked_dims(dims[0], dims[1], "pfm")?;
    let scale: f64 = lines[2].trim().parse().map_err(|_| format_err("pfm", format!("bad scale {:?}", lines[2])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(format_err("pfm", "scale must be finite and nonzero"));
    }
    let little = scale < 0.0;
    let n = w as usize * h as usize * 3;
    let raster = &bytes[pos..];
    if raster.len() < n * 4 {
        return Err(format_err("pfm", format!("raster has {} bytes, expected {}", raster.len(), n * 4)));
    }
    let vals: Vec<f32> = raster[..n * 4]
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }
        })
        .collect();
    let mut img = Image::new(w, h);
    for row in 0..h {
        let y = h - 1 - row;
        for x in 0..w {
            let i = (row as usize * w as usize + x as usize) * 3;
            img.set(x, y, [T::lit(vals[i] as f64), T::lit(vals[i + 1] as f64), T::lit(vals[i + 2] as f64)]);
        }
    }
    Ok(img)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_ppm<T: Real>(path: impl AsRef<Path>, img: &Image<T>) -> Result<()> {
    write(path.as_ref(), &encode_ppm(img))
}

pub fn read_ppm<T: Real>(path: impl AsRef<Path>) -> Result<Image<T>> {
    decode_ppm(&read(path.as_ref())?)
}

pub fn write_pgm_mask(path: impl AsRef<Path>, mask: &[bool], width: u32, height: u32) -> Result<()> {
    write(path.as_ref(), &encode_pgm_mask(mask, width, height)?)
}

pub fn read_pgm_mask(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<bool>)> {
    decode_pgm_mask(&read(path.as_ref())?)
}

pub fn write_pfm<T: Real>(path: impl AsRef<Path>, img: &Image<T>) -> Result<()> {
    write(path.as_ref(), &encode_pfm(img))
}

pub fn read_pfm<T: Real>(path: impl AsRef<Path>) -> Result<Image<T>> {
    decode_pfm(&read(path.as_ref())?)
}

/// Writes texels as PPM and the observed mask as PGM.
pub fn save_envmap<T: Real>(env: &EnvironmentMap<T>, ppm: impl AsRef<Path>, mask: impl AsRef<Path>) -> Result<()> {
    write_ppm(ppm, env.texels())?;
    write_pgm_mask(mask, env.observed(), env.width(), env.height())
}

/// Loads a map written by [`save_envmap`]. Every observed texel gets
/// timestamp 0.
pub fn load_envmap<T: Real>(ppm: impl AsRef<Path>, mask: impl AsRef<Path>) -> Result<EnvironmentMap<T>> {
    let img = read_ppm::<T>(ppm)?;
    let (w, h, observed) = read_pgm_mask(mask)?;
    if (w, h) != (img.width(), img.height()) {
        return Err(Error::DimensionMismatch(format!(
            "mask is {w}x{h}, map is {}x{}",
            img.width(),
            img.height()
        )));
    }
    EnvironmentMap::from_parts(img, observed, 0)
}
