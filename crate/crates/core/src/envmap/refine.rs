use crate::error::{Error, Result};
use crate::geometry::{dir_to_equirect, DevicePose, Rotation, UnitDirection, Vec3};
use crate::image::luma;
use crate::real::Real;

use super::{EnvironmentMap, Frame};

/// Minimum fraction of all texels that must be observed inside the frame's
/// nominal frustum.
const MIN_OVERLAP: f64 = 0.01;
/// Approximate number of frame pixels sampled along the longer image axis.
const SAMPLES_ACROSS: u32 = 64;
const MIN_PAIRS: usize = 16;

/// Refines a frame's orientation against the map by exhaustive search over
/// small yaw/pitch/roll offsets applied in the camera frame.
///
/// Each candidate is scored by zero-mean normalized cross-correlation between
/// frame luma and map luma over samples that land on observed texels. The
/// highest score wins; ties go to the smallest offset, then lexicographic
/// `(yaw, pitch, roll)`. When correlation is undefined everywhere (flat
/// texture) the nominal pose is returned.
pub fn refine_pose<T: Real>(
    env: &EnvironmentMap<T>,
    frame: &Frame<T>,
    search_deg: T,
    grid_step_deg: T,
) -> Result<DevicePose<T>> {
    if !(search_deg >= T::zero()) || !(grid_step_deg > T::zero()) {
        return Err(Error::invalid(format!(
            "search {search_deg} deg / step {grid_step_deg} deg must be non-negative / positive"
        )));
    }

    let overlap = nominal_overlap(env, frame);
    if overlap < MIN_OVERLAP {
        return Err(Error::InsufficientOverlap { fraction: overlap, required: MIN_OVERLAP });
    }

    let samples = frame_samples(frame);
    if variance(samples.iter().map(|s| s.1)) <= T::lit(1e-12) {
        return Ok(frame.pose);
    }

    let plane = env.texels().luma_plane();
    let steps = (search_deg / grid_step_deg).round().to_i64().unwrap_or(0);
    let mut offsets: Vec<(i64, i64, i64)> = Vec::new();
    for a in -steps..=steps {
        for b in -steps..=steps {
            for c in -steps..=steps {
                offsets.push((a, b, c));
            }
        }
    }
    offsets.sort_by_key(|&(a, b, c)| (a * a + b * b + c * c, a, b, c));

    let mut best: Option<(T, Rotation<T>)> = None;
    for (a, b, c) in offsets {
        let offset = Rotation::from_yaw_pitch_roll_deg(
            grid_step_deg * T::from(a).unwrap(),
            grid_step_deg * T::from(b).unwrap(),
            grid_step_deg * T::from(c).unwrap(),
        );
        let candidate = frame.pose.rotation.compose(&offset);
        let Some(score) = ncc(env, &plane, &candidate, &samples) else {
            continue;
        };
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, candidate));
        }
    }

    Ok(match best {
        Some((_, rotation)) => DevicePose { rotation, position: frame.pose.position },
        None => frame.pose,
    })
}

fn nominal_overlap<T: Real>(env: &EnvironmentMap<T>, frame: &Frame<T>) -> f64 {
    let mut count = 0usize;
    for y in 0..env.height() {
        for x in 0..env.width() {
            let i = env.texels().index(x, y);
            if env.observed()[i]
                && crate::geometry::direction_to_pixel(&frame.intrinsics, &frame.pose, &env.texel_direction(x, y))
                    .is_some()
            {
                count += 1;
            }
        }
    }
    count as f64 / env.observed().len() as f64
}

/// Camera-local rays and luma for a regular grid of frame pixels.
fn frame_samples<T: Real>(frame: &Frame<T>) -> Vec<(Vec3<T>, T)> {
    let intr = &frame.intrinsics;
    let (w, h) = (intr.width_px(), intr.height_px());
    let stride = (w.max(h) / SAMPLES_ACROSS).max(1);
    let (fx, fy) = (intr.fx(), intr.fy());
    let half = T::lit(0.5);
    let mut out = Vec::new();
    for y in (0..h).step_by(stride as usize) {
        for x in (0..w).step_by(stride as usize) {
            let px = T::from(x).unwrap() + half;
            let py = T::from(y).unwrap() + half;
            let ray = Vec3::new((px - intr.width() * half) / fx, (intr.height() * half - py) / fy, -T::one());
            out.push((UnitDirection::normalize_unchecked(ray).as_vec(), luma(&frame.image.get(x, y))));
        }
    }
    out
}

fn ncc<T: Real>(
    env: &EnvironmentMap<T>,
    plane: &[T],
    rotation: &Rotation<T>,
    samples: &[(Vec3<T>, T)],
) -> Option<T> {
    let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) =
        (0usize, T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (ray, a) in samples {
        let d = UnitDirection::normalize_unchecked(rotation.rotate(*ray));
        let Some(b) = observed_luma(env, plane, &d) else {
            continue;
        };
        n += 1;
        sa += *a;
        sb += b;
        saa += *a * *a;
        sbb += b * b;
        sab += *a * b;
    }
    if n < MIN_PAIRS {
        return None;
    }
    let nf = T::from_usize_lossy(n);
    let va = saa / nf - (sa / nf).powi(2);
    let vb = sbb / nf - (sb / nf).powi(2);
    let cov = sab / nf - (sa / nf) * (sb / nf);
    let tiny = T::lit(1e-12);
    if va <= tiny || vb <= tiny {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Bilinear luma from the map, only when all four neighbouring texels are observed.
fn observed_luma<T: Real>(env: &EnvironmentMap<T>, plane: &[T], d: &UnitDirection<T>) -> Option<T> {
    let (u, v) = dir_to_equirect(d);
    let (w, h) = (env.width(), env.height());
    let x = u * T::from(w).unwrap() - T::lit(0.5);
    let y = (v * T::from(h).unwrap() - T::lit(0.5)).max(T::zero()).min(T::from(h - 1).unwrap());
    let (x0f, y0f) = (x.floor(), y.floor());
    let (tx, ty) = (x - x0f, y - y0f);
    let wi = w as i64;
    let x0 = x0f.to_i64()?.rem_euclid(wi) as usize;
    let x1 = (x0 + 1) % w as usize;
    let y0 = y0f.to_usize()?;
    let y1 = (y0 + 1).min(h as usize - 1);
    let row = w as usize;
    let idx = [y0 * row + x0, y0 * row + x1, y1 * row + x0, y1 * row + x1];
    if !idx.iter().all(|&i| env.observed()[i]) {
        return None;
    }
    let top = plane[idx[0]] + (plane[idx[1]] - plane[idx[0]]) * tx;
    let bottom = plane[idx[2]] + (plane[idx[3]] - plane[idx[2]]) * tx;
    Some(top + (bottom - top) * ty)
}

fn variance<T: Real>(values: impl Iterator<Item = T>) -> T {
    let (mut n, mut s, mut ss) = (0usize, T::zero(), T::zero());
    for v in values {
        n += 1;
        s += v;
        ss += v * v;
    }
    if n == 0 {
        return T::zero();
    }
    let nf = T::from_usize_lossy(n);
    ss / nf - (s / nf).powi(2)
}
