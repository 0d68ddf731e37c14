use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::envmap::EnvironmentMap;
use crate::geometry::{project_local, CameraIntrinsics, DevicePose, Vec3};
use crate::real::Real;

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Fraction of sphere directions observed by a camera set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub fraction: f64,
    pub n_samples: usize,
    pub dilation_deg: f64,
    pub per_camera: BTreeMap<String, f64>,
}

/// A labelled camera frustum; `pose` is the camera pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Frustum<T> {
    pub label: String,
    pub intrinsics: CameraIntrinsics<T>,
    pub pose: DevicePose<T>,
}

impl<T: Real> Frustum<T> {
    pub fn new(label: impl Into<String>, intrinsics: CameraIntrinsics<T>, pose: DevicePose<T>) -> Self {
        Self { label: label.into(), intrinsics, pose }
    }

    pub fn contains(&self, d: &Vec3<T>) -> bool {
        project_local(&self.intrinsics, self.pose.rotation.unrotate(*d)).is_some()
    }
}

/// Golden-angle spiral of `n` nearly uniform directions. Deterministic in `n`.
pub fn fibonacci_sphere<T: Real>(n: usize) -> Vec<Vec3<T>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            Vec3::new(T::lit(r * c), T::lit(y), T::lit(r * s))
        })
        .collect()
}

/// Observation coverage of a set of frusta over a Fibonacci lattice of `n`
/// directions. With `dilation_deg > 0`, a direction also counts when it lies
/// within that angle of an observed lattice direction.
pub fn coverage<T: Real>(frusta: &[Frustum<T>], n: usize, dilation_deg: f64) -> CoverageReport {
    let n = n.max(1);
    let dirs = fibonacci_sphere::<T>(n);

    let mut labels: Vec<&str> = frusta.iter().map(|f| f.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();

    let mut union = vec![false; n];
    let mut per_camera = BTreeMap::new();
    for label in labels {
        let members: Vec<&Frustum<T>> = frusta.iter().filter(|f| f.label == label).collect();
        let mut mask: Vec<bool> = dirs.iter().map(|d| members.iter().any(|f| f.contains(d))).collect();
        for (u, m) in union.iter_mut().zip(&mask) {
            *u |= *m;
        }
        if dilation_deg > 0.0 {
            mask = dilate(&dirs, &mask, dilation_deg);
        }
        per_camera.insert(label.to_string(), count(&mask) as f64 / n as f64);
    }
    if dilation_deg > 0.0 {
        union = dilate(&dirs, &union, dilation_deg);
    }
    CoverageReport { fraction: count(&union) as f64 / n as f64, n_samples: n, dilation_deg, per_camera }
}

/// Coverage of a reconstructed map: a lattice direction is observed when its
/// nearest texel is. Per-camera fractions use the camera that wrote the texel.
pub fn coverage_of_envmap<T: Real>(env: &EnvironmentMap<T>, n: usize) -> CoverageReport {
    let n = n.max(1);
    let (w, h) = (env.width() as usize, env.height() as usize);
    let mut observed = 0usize;
    let mut per: BTreeMap<String, usize> = BTreeMap::new();
    for d in fibonacci_sphere::<f64>(n) {
        let phi = d.x.atan2(0.0 - d.z);
        let theta = d.y.clamp(-1.0, 1.0).acos();
        let u = phi / std::f64::consts::TAU + 0.5;
        let v = theta / std::f64::consts::PI;
        let x = ((u * w as f64).floor() as usize).min(w - 1);
        let y = ((v * h as f64).floor() as usize).min(h - 1);
        let i = y * w + x;
        if env.observed()[i] {
            observed += 1;
            if let Some(cam) = env.writer()[i] {
                *per.entry(cam.to_string()).or_default() += 1;
            }
        }
    }
    CoverageReport {
        fraction: observed as f64 / n as f64,
        n_samples: n,
        dilation_deg: 0.0,
        per_camera: per.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect(),
    }
}

fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&m| m).count()
}

/// Marks every direction within `deg` of a marked direction, using a
/// latitude/longitude bucket grid with cells at least `deg` wide.
fn dilate<T: Real>(dirs: &[Vec3<T>], mask: &[bool], deg: f64) -> Vec<bool> {
    use std::f64::consts::{PI, TAU};
    let radius = deg.to_radians();
    let cos_r = radius.cos();
    let n_theta = ((PI / radius).floor() as usize).clamp(1, 4096);
    let n_phi = ((TAU / radius).floor() as usize).clamp(1, 8192);

    let polar = |d: &Vec3<T>| {
        let (x, y, z) = (d.x.as_f64(), d.y.as_f64(), d.z.as_f64());
        let theta = y.clamp(-1.0, 1.0).acos();
        let phi = z.atan2(x).rem_euclid(TAU);
        (theta, phi)
    };
    let cell = |theta: f64, phi: f64| {
        let ti = ((theta / PI * n_theta as f64) as usize).min(n_theta - 1);
        let pi = ((phi / TAU * n_phi as f64) as usize).min(n_phi - 1);
        (ti, pi)
    };

    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); n_theta * n_phi];
    for (i, d) in dirs.iter().enumerate() {
        if mask[i] {
            let (t, p) = polar(d);
            let (ti, pi) = cell(t, p);
            buckets[ti * n_phi + pi].push(i as u32);
        }
    }

    let mut out = mask.to_vec();
    for (i, d) in dirs.iter().enumerate() {
        if out[i] {
            continue;
        }
        let (theta, phi) = polar(d);
        let (ti, _) = cell(theta, phi);
        let t_lo = ti.saturating_sub(1);
        let t_hi = (ti + 1).min(n_theta - 1);
        let band_lo = theta - radius;
        let band_hi = theta + radius;
        let all_phi = band_lo <= 0.0 || band_hi >= PI || {
            let min_sin = band_lo.sin().min(band_hi.sin());
            radius.sin() >= min_sin
        };
        let phi_cells: Vec<usize> = if all_phi {
            (0..n_phi).collect()
        } else {
            let span = (radius.sin() / band_lo.sin().min(band_hi.sin())).asin();
            let lo = ((phi - span) / TAU * n_phi as f64).floor() as i64;
            let hi = ((phi + span) / TAU * n_phi as f64).floor() as i64;
            let mut cells: Vec<usize> = (lo..=hi).map(|c| c.rem_euclid(n_phi as i64) as usize).collect();
            cells.sort_unstable();
            cells.dedup();
            cells
        };
        'search: for t in t_lo..=t_hi {
            for &p in &phi_cells {
                for &j in &buckets[t * n_phi + p] {
                    if dirs[j as usize].dot(*d).as_f64() >= cos_r {
                        out[i] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    out
}

/// Fraction of the sphere inside a single rectangular frustum.
pub fn analytic_frustum_fraction<T: Real>(intr: &CameraIntrinsics<T>) -> f64 {
    intr.solid_angle().as_f64() / (4.0 * std::f64::consts::PI)
}
