use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::real::Real;

pub const SSIM_WINDOW: u32 = 8;
pub const SSIM_STRIDE: u32 = 4;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Infinite for identical images; serialized as the string `"inf"`.
    #[serde(with = "crate::serde_inf")]
    pub psnr_db: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn compare<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<Self> {
        Ok(Self { psnr_db: psnr(a, b, T::one())?.as_f64(), ssim: ssim(a, b)?.as_f64() })
    }
}

fn check_same<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<()> {
    if !a.same_size(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio over all channels; identical images give +∞.
pub fn psnr<T: Real>(a: &Image<T>, b: &Image<T>, max_val: T) -> Result<T> {
    check_same(a, b)?;
    let n = a.pixels().len() * 3;
    if n == 0 {
        return Err(Error::DimensionMismatch("empty images".into()));
    }
    let sse = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |k| (p[k] - q[k]) * (p[k] - q[k])))
        .fold(T::zero(), |acc, e| acc + e);
    let mse = sse / T::from_usize_lossy(n);
    if mse == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(10.0) * (max_val * max_val / mse).log10())
}

/// Mean SSIM over 8×8 windows at stride 4 on Rec.601 luma, dynamic range 1.
pub fn ssim<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<T> {
    check_same(a, b)?;
    ssim_luma(&a.luma_plane(), &b.luma_plane(), a.width(), a.height())
}

/// SSIM on pre-computed luma planes of size `width × height`.
pub fn ssim_luma<T: Real>(a: &[T], b: &[T], width: u32, height: u32) -> Result<T> {
    if a.len() != b.len() || a.len() != width as usize * height as usize {
        return Err(Error::DimensionMismatch("luma planes differ in size".into()));
    }
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::DimensionMismatch(format!(
            "{width}x{height} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let c1 = T::lit((K1 * DYNAMIC_RANGE).powi(2));
    let c2 = T::lit((K2 * DYNAMIC_RANGE).powi(2));
    let n = T::from_usize_lossy((SSIM_WINDOW * SSIM_WINDOW) as usize);
    let w = width as usize;

    let mut total = T::zero();
    let mut windows = 0usize;
    for y0 in (0..=height - SSIM_WINDOW).step_by(SSIM_STRIDE as usize) {
        for x0 in (0..=width - SSIM_WINDOW).step_by(SSIM_STRIDE as usize) {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
            for y in y0..y0 + SSIM_WINDOW {
                let row = y as usize * w;
                for x in x0..x0 + SSIM_WINDOW {
                    let (p, q) = (a[row + x as usize], b[row + x as usize]);
                    sa += p;
                    sb += q;
                    saa += p * p;
                    sbb += q * q;
                    sab += p * q;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = saa / n - ma * ma;
            let vb = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            let num = (T::lit(2.0) * ma * mb + c1) * (T::lit(2.0) * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / T::from_usize_lossy(windows))
}
