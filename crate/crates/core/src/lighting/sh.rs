//! Order-2 real spherical harmonics.
//!
//! Orthonormal real basis over the unit sphere, in this coefficient order:
//!
//! | index | (l, m)  | basis                      |
//! |-------|---------|----------------------------|
//! | 0     | (0, 0)  | 0.282095                   |
//! | 1     | (1, −1) | 0.488603 · y               |
//! | 2     | (1, 0)  | 0.488603 · z               |
//! | 3     | (1, 1)  | 0.488603 · x               |
//! | 4     | (2, −2) | 1.092548 · x·y             |
//! | 5     | (2, −1) | 1.092548 · y·z             |
//! | 6     | (2, 0)  | 0.315392 · (3z² − 1)       |
//! | 7     | (2, 1)  | 1.092548 · x·z             |
//! | 8     | (2, 2)  | 0.546274 · (x² − y²)       |
//!
//! Coordinates are world coordinates (+y up, forward −z).

use crate::envmap::{row_trig, col_trig, texel_solid_angle, EnvironmentMap};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::image::{gamma_decode, Rgb};
use crate::linalg;
use crate::real::Real;

pub const SH_COUNT: usize = 9;

/// `√(1/4π)`, the constant band-0 basis value.
pub const Y00: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: f64 = 1.092_548_430_592_079_2;
const C20: f64 = 0.315_391_565_252_520_05;
const C22: f64 = 0.546_274_215_296_039_6;

/// Cosine-lobe convolution weights per band: π, 2π/3, π/4.
const IRRADIANCE_BAND: [f64; 3] =
    [std::f64::consts::PI, 2.0 * std::f64::consts::PI / 3.0, std::f64::consts::PI / 4.0];

const BAND_OF: [usize; SH_COUNT] = [0, 1, 1, 1, 2, 2, 2, 2, 2];

/// Minimum observed texel fraction for a fit.
pub const MIN_OBSERVED_FRACTION: f64 = 0.01;

pub fn sh_basis<T: Real>(d: Vec3<T>) -> [T; SH_COUNT] {
    let (x, y, z) = (d.x, d.y, d.z);
    [
        T::lit(Y00),
        T::lit(C1) * y,
        T::lit(C1) * z,
        T::lit(C1) * x,
        T::lit(C2) * x * y,
        T::lit(C2) * y * z,
        T::lit(C20) * (T::lit(3.0) * z * z - T::one()),
        T::lit(C2) * x * z,
        T::lit(C22) * (x * x - y * y),
    ]
}

/// Nine RGB coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShCoeffs<T> {
    pub coeffs: [Rgb<T>; SH_COUNT],
}

impl<T: Real> ShCoeffs<T> {
    pub fn zero() -> Self {
        Self { coeffs: [[T::zero(); 3]; SH_COUNT] }
    }

    /// Radiance reconstructed in direction `d`.
    pub fn eval(&self, d: Vec3<T>) -> Rgb<T> {
        self.weighted_sum(d, |_| T::one())
    }

    /// Irradiance on a surface with normal `n` (cosine-lobe convolution).
    pub fn irradiance(&self, n: Vec3<T>) -> Rgb<T> {
        self.weighted_sum(n, |band| T::lit(IRRADIANCE_BAND[band]))
    }

    fn weighted_sum(&self, d: Vec3<T>, band_weight: impl Fn(usize) -> T) -> Rgb<T> {
        let y = sh_basis(d);
        let mut out = [T::zero(); 3];
        for (i, c) in self.coeffs.iter().enumerate() {
            let w = y[i] * band_weight(BAND_OF[i]);
            for k in 0..3 {
                out[k] += c[k] * w;
            }
        }
        out
    }

    /// Constant (band-0) radiance component.
    pub fn dc(&self) -> Rgb<T> {
        self.coeffs[0].map(|c| c * T::lit(Y00))
    }

    pub fn scale(&self, s: T) -> Self {
        Self { coeffs: self.coeffs.map(|c| c.map(|v| v * s)) }
    }

    /// Coefficient-major flattening: `[c0.r, c0.g, c0.b, c1.r, …]`.
    pub fn to_flat(&self) -> [T; 27] {
        let mut out = [T::zero(); 27];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[3 * i..3 * i + 3].copy_from_slice(c);
        }
        out
    }

    pub fn from_flat(flat: &[T]) -> Result<Self> {
        if flat.len() != 3 * SH_COUNT {
            return Err(Error::DimensionMismatch(format!("expected 27 SH values, got {}", flat.len())));
        }
        let mut s = Self::zero();
        for (i, c) in s.coeffs.iter_mut().enumerate() {
            c.copy_from_slice(&flat[3 * i..3 * i + 3]);
        }
        Ok(s)
    }
}

/// Weighted least-squares SH fit over `(direction, linear rgb, weight)` samples.
pub fn fit_samples<T: Real>(samples: impl Iterator<Item = (Vec3<T>, Rgb<T>, T)>) -> Option<ShCoeffs<T>> {
    let mut ata = [[T::zero(); SH_COUNT]; SH_COUNT];
    let mut atb = [[T::zero(); SH_COUNT]; 3];
    let mut total = T::zero();
    for (d, c, w) in samples {
        let y = sh_basis(d);
        for i in 0..SH_COUNT {
            let wy = w * y[i];
            for j in i..SH_COUNT {
                ata[i][j] += wy * y[j];
            }
            for k in 0..3 {
                atb[k][i] += wy * c[k];
            }
        }
        total += w;
    }
    if total <= T::zero() {
        return None;
    }
    // Tiny ridge keeps nearly-degenerate partial coverage solvable.
    let ridge = T::lit(1e-9) * total;
    for i in 0..SH_COUNT {
        ata[i][i] += ridge;
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    let mut out = ShCoeffs::zero();
    for k in 0..3 {
        let x = linalg::solve(ata, atb[k], T::lit(1e-14))?;
        for i in 0..SH_COUNT {
            out.coeffs[i][k] = x[i];
        }
    }
    Some(out)
}

/// Solid-angle-weighted least-squares fit to the observed texels, after
/// decoding them to linear radiance.
pub fn fit_sh<T: Real>(env: &EnvironmentMap<T>) -> Result<ShCoeffs<T>> {
    let fraction = env.observed_fraction();
    if fraction < MIN_OBSERVED_FRACTION || env.observed_count() == 0 {
        return Err(Error::InsufficientObservation { fraction, required: MIN_OBSERVED_FRACTION });
    }
    fit_texels(env, true).ok_or(Error::InsufficientObservation { fraction, required: MIN_OBSERVED_FRACTION })
}

/// Fits every texel (observed or not) or only observed ones.
pub(crate) fn fit_texels<T: Real>(env: &EnvironmentMap<T>, observed_only: bool) -> Option<ShCoeffs<T>> {
    let (w, h) = (env.width(), env.height());
    let rows = row_trig::<T>(h);
    let cols = col_trig::<T>(w);
    let areas: Vec<T> = (0..h).map(|y| texel_solid_angle(w, h, y)).collect();
    let texels = env.texels().pixels();
    let observed = env.observed();
    let samples = (0..h as usize).flat_map(|y| {
        let (st, ct) = rows[y];
        let area = areas[y];
        let cols = &cols;
        (0..w as usize).filter_map(move |x| {
            let i = y * w as usize + x;
            if observed_only && !observed[i] {
                return None;
            }
            let (sp, cp) = cols[x];
            Some((Vec3::new(st * sp, ct, -st * cp), texels[i].map(gamma_decode), area))
        })
    });
    fit_samples(samples)
}
