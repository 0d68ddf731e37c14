use serde::{Deserialize, Serialize};

use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::geometry::{UnitDirection, Vec3};
use crate::image::{gamma_encode, Image};
use crate::lighting::fit_texels;
use crate::real::Real;

pub const MIN_PROBE_RES: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMaterial {
    Mirror,
    Diffuse,
}

/// Orthographic render of a unit sphere lit by `env`, seen along `view_dir`.
///
/// Mirror probes sample the map along the reflected view ray. Diffuse probes
/// (albedo 1) use the order-2 SH irradiance of the whole map, unobserved
/// texels included. Pixels outside the disc are black. Output is γ-encoded.
pub fn render_probe<T: Real>(
    env: &EnvironmentMap<T>,
    material: ProbeMaterial,
    res_px: u32,
    view_dir: &UnitDirection<T>,
) -> Result<Image<T>> {
    if res_px < MIN_PROBE_RES {
        return Err(Error::invalid(format!("probe resolution {res_px} below {MIN_PROBE_RES}")));
    }
    let view = view_dir.as_vec();
    let world_up = if view.y.abs() > T::lit(0.999) { Vec3::new(T::zero(), T::zero(), -T::one()) } else { Vec3::new(T::zero(), T::one(), T::zero()) };
    let right = unit(view.cross(world_up));
    let up = right.cross(view);
    let sh = match material {
        ProbeMaterial::Diffuse => Some(fit_texels(env, false).unwrap_or_else(crate::lighting::ShCoeffs::zero)),
        ProbeMaterial::Mirror => None,
    };
    let res = T::from(res_px).unwrap();
    Ok(Image::from_fn(res_px, res_px, |px, py| {
        let sx = T::lit(2.0) * (T::from(px).unwrap() + T::lit(0.5)) / res - T::one();
        let sy = T::one() - T::lit(2.0) * (T::from(py).unwrap() + T::lit(0.5)) / res;
        let r2 = sx * sx + sy * sy;
        if r2 > T::one() {
            return [T::zero(); 3];
        }
        let n = unit(right.scale(sx) + up.scale(sy) - view.scale((T::one() - r2).sqrt()));
        match &sh {
            None => {
                let refl = view - n.scale(T::lit(2.0) * view.dot(n));
                env.sample(&UnitDirection::normalize_unchecked(refl))
            }
            Some(sh) => sh.irradiance(n).map(|e| gamma_encode((e / T::PI()).max(T::zero()).min(T::one()))),
        }
    }))
}

fn unit<T: Real>(v: Vec3<T>) -> Vec3<T> {
    v.scale(T::one() / v.norm())
}
