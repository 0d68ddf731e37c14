//! Parametric lighting from partial LDR environment maps.
//!
//! All lighting math runs on linear radiance: texels are decoded from
//! γ = 2.2 before use and fills are re-encoded on the way back.

mod sh;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use sh::{fit_samples, fit_sh, sh_basis, ShCoeffs, MIN_OBSERVED_FRACTION, SH_COUNT, Y00};
pub(crate) use sh::fit_texels;

use crate::envmap::{col_trig, row_trig, texel_solid_angle, EnvironmentMap};
use crate::error::{Error, Result};
use crate::geometry::{UnitDirection, Vec3};
use crate::image::{gamma_decode, gamma_encode, luminance, Rgb};
use crate::real::Real;

pub const DEFAULT_BLEND_BAND_DEG: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateParams {
    /// Luminance exponent of the direction weights.
    pub exponent: f64,
    /// Share of the observed solid angle, brightest first, that votes on the
    /// dominant direction.
    pub top_fraction: f64,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self { exponent: 4.0, top_fraction: 0.05 }
    }
}

/// Dominant directional light, ambient term and order-2 SH, all linear.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightEstimate<T> {
    pub dominant_dir: UnitDirection<T>,
    pub dominant_rgb: Rgb<T>,
    pub ambient_rgb: Rgb<T>,
    pub sh: ShCoeffs<T>,
}

#[derive(Serialize, Deserialize)]
struct LightRecord {
    dominant_dir: [f64; 3],
    dominant_rgb: [f64; 3],
    ambient_rgb: [f64; 3],
    sh: Vec<f64>,
}

impl<T: Real> Serialize for LightEstimate<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let f = |c: Rgb<T>| c.map(|v| v.as_f64());
        LightRecord {
            dominant_dir: f(self.dominant_dir.as_vec().to_array()),
            dominant_rgb: f(self.dominant_rgb),
            ambient_rgb: f(self.ambient_rgb),
            sh: self.sh.to_flat().iter().map(|v| v.as_f64()).collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for LightEstimate<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = LightRecord::deserialize(d)?;
        let f = |c: [f64; 3]| c.map(T::lit);
        let [x, y, z] = f(r.dominant_dir);
        let dominant_dir = UnitDirection::new(x, y, z).map_err(D::Error::custom)?;
        let sh: Vec<T> = r.sh.into_iter().map(T::lit).collect();
        Ok(Self {
            dominant_dir,
            dominant_rgb: f(r.dominant_rgb),
            ambient_rgb: f(r.ambient_rgb),
            sh: ShCoeffs::from_flat(&sh).map_err(D::Error::custom)?,
        })
    }
}

pub fn estimate_lights<T: Real>(env: &EnvironmentMap<T>) -> Result<LightEstimate<T>> {
    estimate_lights_with(env, &EstimateParams::default())
}

pub fn estimate_lights_with<T: Real>(env: &EnvironmentMap<T>, params: &EstimateParams) -> Result<LightEstimate<T>> {
    if !(params.top_fraction > 0.0 && params.top_fraction <= 1.0) || !(params.exponent >= 0.0) {
        return Err(Error::invalid(format!(
            "estimate parameters out of range: top_fraction {}, exponent {}",
            params.top_fraction, params.exponent
        )));
    }
    let sh = fit_sh(env)?;
    let (w, h) = (env.width(), env.height());
    let rows = row_trig::<T>(h);
    let cols = col_trig::<T>(w);

    struct Texel<T> {
        dir: Vec3<T>,
        rgb: Rgb<T>,
        lum: T,
        area: T,
    }
    let mut texels = Vec::with_capacity(env.observed_count());
    let mut ambient = [T::zero(); 3];
    let mut total_area = T::zero();
    for y in 0..h {
        let area = texel_solid_angle::<T>(w, h, y);
        let (st, ct) = rows[y as usize];
        for x in 0..w {
            let i = (y * w + x) as usize;
            if !env.observed()[i] {
                continue;
            }
            let rgb = env.texels().pixels()[i].map(gamma_decode);
            let (sp, cp) = cols[x as usize];
            for k in 0..3 {
                ambient[k] += rgb[k] * area;
            }
            total_area += area;
            texels.push(Texel { dir: Vec3::new(st * sp, ct, -st * cp), rgb, lum: luminance(&rgb), area });
        }
    }
    let ambient_rgb = ambient.map(|v| v / total_area);

    // Brightest first; equal luminance keeps raster order (top rows first).
    texels.sort_by(|a, b| b.lum.partial_cmp(&a.lum).unwrap_or(std::cmp::Ordering::Equal));
    let budget = total_area * T::lit(params.top_fraction);
    let mut taken_area = T::zero();
    let mut n_top = 0;
    while n_top < texels.len() && (n_top == 0 || taken_area < budget) {
        taken_area += texels[n_top].area;
        n_top += 1;
    }
    let top = &texels[..n_top];

    let mut rgb_sum = [T::zero(); 3];
    let mut dir_sum = Vec3::zero();
    for t in top {
        for k in 0..3 {
            rgb_sum[k] += t.rgb[k] * t.area;
        }
        dir_sum = dir_sum + t.dir.scale(t.lum.powf(T::lit(params.exponent)) * t.area);
    }
    let dominant_rgb = rgb_sum.map(|v| v / taken_area);

    let lum_max = texels[0].lum;
    let lum_min = texels[texels.len() - 1].lum;
    let uniform = lum_max - lum_min <= T::lit(1e-12) * lum_max.max(T::one());
    let dominant_dir = if uniform {
        UnitDirection::up()
    } else {
        UnitDirection::from_vec(dir_sum).unwrap_or_else(|_| UnitDirection::up())
    };

    Ok(LightEstimate { dominant_dir, dominant_rgb, ambient_rgb, sh })
}

/// [`complete_envmap_with_band`] with the default 5° blend band.
pub fn complete_envmap<T: Real>(env: &EnvironmentMap<T>, est: &LightEstimate<T>) -> EnvironmentMap<T> {
    complete_envmap_with_band(env, est, T::lit(DEFAULT_BLEND_BAND_DEG))
}

/// Fills unobserved texels from the SH reconstruction, clamped to [0, 1].
///
/// Within `band_deg` of the nearest observed texel the fill is blended
/// linearly from that texel's value to the SH value. Observed texels and the
/// observed mask are returned unchanged.
pub fn complete_envmap_with_band<T: Real>(
    env: &EnvironmentMap<T>,
    est: &LightEstimate<T>,
    band_deg: T,
) -> EnvironmentMap<T> {
    let mut out = env.clone();
    let (w, h) = (env.width() as usize, env.height() as usize);
    let rows = row_trig::<T>(h as u32);
    let cols = col_trig::<T>(w as u32);
    let dirs: Vec<Vec3<T>> = (0..h)
        .flat_map(|y| {
            let (st, ct) = rows[y];
            cols.iter().map(move |&(sp, cp)| Vec3::new(st * sp, ct, -st * cp))
        })
        .collect();
    let observed = env.observed();
    let any_observed = observed.iter().any(|&o| o);
    let band = band_deg.max(T::zero()).to_radians();
    let cos_band = band.cos();
    let dtheta = T::PI() / T::from_usize_lossy(h);
    let dphi = T::TAU() / T::from_usize_lossy(w);
    let ry = (band / dtheta).ceil().to_usize().unwrap_or(0) + 1;

    for y in 0..h {
        let sin_row = rows[y].0;
        for x in 0..w {
            let i = y * w + x;
            if observed[i] {
                continue;
            }
            let d = dirs[i];
            let fill = est.sh.eval(d).map(|v| v.max(T::zero()).min(T::one()));
            let mut value = fill;
            if any_observed && band > T::zero() {
                if let Some((j, cos_d)) = nearest_observed(observed, &dirs, w, h, x, y, ry, band, sin_row, dphi, cos_band)
                {
                    let t = cos_d.min(T::one()).acos() / band;
                    let obs = env.texels().pixels()[j].map(gamma_decode);
                    for k in 0..3 {
                        value[k] = obs[k] * (T::one() - t) + fill[k] * t;
                    }
                }
            }
            out.fill_texel(i, value.map(gamma_encode));
        }
    }
    out
}

/// Observed texel closest to `(x, y)` within `band` radians, with the cosine
/// of its angular distance.
#[allow(clippy::too_many_arguments)]
fn nearest_observed<T: Real>(
    observed: &[bool],
    dirs: &[Vec3<T>],
    w: usize,
    h: usize,
    x: usize,
    y: usize,
    ry: usize,
    band: T,
    sin_row: T,
    dphi: T,
    cos_band: T,
) -> Option<(usize, T)> {
    let d = dirs[y * w + x];
    let y0 = y.saturating_sub(ry);
    let y1 = (y + ry).min(h - 1);
    // Columns within the band at the widest row of the window.
    let mut min_sin = sin_row;
    for yy in [y0, y1] {
        let s = ((T::from_usize_lossy(yy) + T::lit(0.5)) / T::from_usize_lossy(h) * T::PI()).sin();
        min_sin = min_sin.min(s);
    }
    let span = if min_sin * dphi * T::from_usize_lossy(w / 2) <= band {
        w / 2
    } else {
        ((band / (min_sin * dphi)).ceil().to_usize().unwrap_or(w / 2) + 1).min(w / 2)
    };
    let (start, ncols) = if 2 * span + 1 >= w { (0, w) } else { (x + w - span, 2 * span + 1) };
    let mut best: Option<(usize, T)> = None;
    for yy in y0..=y1 {
        for off in 0..ncols {
            let xx = (start + off) % w;
            let j = yy * w + xx;
            if !observed[j] {
                continue;
            }
            let c = d.dot(dirs[j]);
            if c >= cos_band && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((j, c));
            }
        }
    }
    best
}
