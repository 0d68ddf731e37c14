//! RGB raster used for camera frames, environment maps and probe renders.

use crate::error::{Error, Result};
use crate::geometry::{dir_to_equirect, UnitDirection};
use crate::real::Real;

pub type Rgb<T> = [T; 3];

/// Display gamma used for every LDR encode/decode.
pub const GAMMA: f64 = 2.2;

#[inline]
pub fn gamma_encode<T: Real>(linear: T) -> T {
    if linear <= T::zero() {
        T::zero()
    } else {
        linear.powf(T::one() / T::lit(GAMMA))
    }
}

#[inline]
pub fn gamma_decode<T: Real>(encoded: T) -> T {
    if encoded <= T::zero() {
        T::zero()
    } else {
        encoded.powf(T::lit(GAMMA))
    }
}

pub fn encode_rgb<T: Real>(c: Rgb<T>) -> Rgb<T> {
    c.map(gamma_encode)
}

pub fn decode_rgb<T: Real>(c: Rgb<T>) -> Rgb<T> {
    c.map(gamma_decode)
}

/// Rec.601 luma.
#[inline]
pub fn luma<T: Real>(c: &Rgb<T>) -> T {
    T::lit(0.299) * c[0] + T::lit(0.587) * c[1] + T::lit(0.114) * c[2]
}

/// Rec.709 relative luminance, for linear radiance.
#[inline]
pub fn luminance<T: Real>(c: &Rgb<T>) -> T {
    T::lit(0.2126) * c[0] + T::lit(0.7152) * c[1] + T::lit(0.0722) * c[2]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    width: u32,
    height: u32,
    data: Vec<Rgb<T>>,
}

impl<T: Real> Image<T> {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, [T::zero(); 3])
    }

    pub fn filled(width: u32, height: u32, value: Rgb<T>) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb<T>) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<Rgb<T>>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels supplied for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb<T>] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgb<T>] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb<T> {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: Rgb<T>) {
        let i = self.index(x, y);
        self.data[i] = c;
    }

    pub fn map(&self, f: impl Fn(Rgb<T>) -> Rgb<T>) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|&c| f(c)).collect() }
    }

    pub fn same_size(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn luma_plane(&self) -> Vec<T> {
        self.data.iter().map(luma).collect()
    }

    /// Bilinear sample at continuous pixel coordinates; pixel centers sit at
    /// half-integers and edges clamp.
    pub fn sample_bilinear(&self, px: T, py: T) -> Rgb<T> {
        let half = T::lit(0.5);
        let max_x = T::from(self.width - 1).unwrap();
        let max_y = T::from(self.height - 1).unwrap();
        let x = (px - half).max(T::zero()).min(max_x);
        let y = (py - half).max(T::zero()).min(max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let (tx, ty) = (x - x0, y - y0);
        let x0 = x0.to_u32().unwrap();
        let y0 = y0.to_u32().unwrap();
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        lerp2(self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1), tx, ty)
    }

    /// Bilinear sample of an equirectangular raster: horizontal wrap-around,
    /// vertical clamp.
    pub fn sample_equirect(&self, u: T, v: T) -> Rgb<T> {
        let w = T::from(self.width).unwrap();
        let h = T::from(self.height).unwrap();
        let half = T::lit(0.5);
        let x = u * w - half;
        let y = (v * h - half).max(T::zero()).min(h - T::one());
        let x0f = x.floor();
        let y0f = y.floor();
        let (tx, ty) = (x - x0f, y - y0f);
        let wi = self.width as i64;
        let x0 = x0f.to_i64().unwrap().rem_euclid(wi) as u32;
        let x1 = ((x0 as i64 + 1) % wi) as u32;
        let y0 = y0f.to_u32().unwrap();
        let y1 = (y0 + 1).min(self.height - 1);
        lerp2(self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1), tx, ty)
    }

    pub fn sample_direction(&self, d: &UnitDirection<T>) -> Rgb<T> {
        let (u, v) = dir_to_equirect(d);
        self.sample_equirect(u, v)
    }
}

#[inline]
fn lerp2<T: Real>(c00: Rgb<T>, c10: Rgb<T>, c01: Rgb<T>, c11: Rgb<T>, tx: T, ty: T) -> Rgb<T> {
    let mut out = [T::zero(); 3];
    for k in 0..3 {
        let top = c00[k] + (c10[k] - c00[k]) * tx;
        let bottom = c01[k] + (c11[k] - c01[k]) * tx;
        out[k] = top + (bottom - top) * ty;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gamma_round_trip() {
        for v in [0.0f64, 0.01, 0.25, 0.5, 1.0] {
            assert_abs_diff_eq!(gamma_decode(gamma_encode(v)), v, epsilon = 1e-12);
        }
        assert_eq!(gamma_encode(-1.0f64), 0.0);
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let img = Image::<f64>::from_fn(4, 3, |x, y| [x as f64, y as f64, 0.0]);
        assert_eq!(img.sample_bilinear(2.5, 1.5), [2.0, 1.0, 0.0]);
        let mid = img.sample_bilinear(2.0, 1.5);
        assert_abs_diff_eq!(mid[0], 1.5, epsilon = 1e-12);
        // clamped at the border
        assert_eq!(img.sample_bilinear(0.0, 0.0), [0.0, 0.0, 0.0]);
        assert_eq!(img.sample_bilinear(4.0, 3.0), [3.0, 2.0, 0.0]);
    }

    #[test]
    fn equirect_sampling_wraps() {
        let img = Image::<f64>::from_fn(8, 4, |x, _| [if x == 0 { 1.0 } else if x == 7 { 0.0 } else { 0.5 }; 3]);
        // halfway between the last and first column centers
        let seam = img.sample_equirect(0.0, 0.5);
        assert_abs_diff_eq!(seam[0], 0.5, epsilon = 1e-12);
        let a = img.sample_equirect(1.0 - 1e-6, 0.5);
        let b = img.sample_equirect(1e-6, 0.5);
        assert!((a[0] - b[0]).abs() < 1e-4);
    }

    #[test]
    fn from_raw_checks_length() {
        assert!(Image::<f32>::from_raw(2, 2, vec![[0.0; 3]; 3]).is_err());
    }
}
