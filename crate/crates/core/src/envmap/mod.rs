//! The reconstructed LDR equirectangular environment map.
//!
//! Texels hold display-encoded (γ = 2.2) values in `[0, 1]`, the same encoding
//! camera frames use. Frames are gathered into the map: every texel center is
//! projected into the frame and bilinearly sampled, so there are no splat holes.

mod refine;

pub use refine::refine_pose;

use crate::error::{Error, Result};
use crate::geometry::{
    equirect_to_dir_unchecked, project_local, CameraId, CameraIntrinsics, DevicePose,
    UnitDirection, Vec3,
};
use crate::image::{Image, Rgb};
use crate::real::Real;

/// Default map height; width is always twice the height.
pub const DEFAULT_HEIGHT_PX: u32 = 256;

/// One camera image with everything needed to place it on the sphere.
/// `pose` is the pose of the camera itself (device pose composed with the
/// camera mount).
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<T> {
    pub image: Image<T>,
    pub intrinsics: CameraIntrinsics<T>,
    pub pose: DevicePose<T>,
    pub camera_id: CameraId,
    pub timestamp_ms: u64,
}

impl<T: Real> Frame<T> {
    pub fn new(
        image: Image<T>,
        intrinsics: CameraIntrinsics<T>,
        pose: DevicePose<T>,
        camera_id: CameraId,
        timestamp_ms: u64,
    ) -> Result<Self> {
        if image.width() != intrinsics.width_px() || image.height() != intrinsics.height_px() {
            return Err(Error::DimensionMismatch(format!(
                "frame image {}x{} does not match intrinsics {}x{}",
                image.width(),
                image.height(),
                intrinsics.width_px(),
                intrinsics.height_px()
            )));
        }
        Ok(Self { image, intrinsics, pose, camera_id, timestamp_ms })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MergeMode {
    /// Newer observations overwrite older ones (back cameras).
    NewestWins,
    /// Only the latest frame of this camera contributes (front camera).
    CurrentOnly,
}

impl MergeMode {
    pub fn for_camera(camera: CameraId) -> Self {
        if camera.is_front() {
            MergeMode::CurrentOnly
        } else {
            MergeMode::NewestWins
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentMap<T> {
    texels: Image<T>,
    observed: Vec<bool>,
    updated_at: Vec<u64>,
    writer: Vec<Option<CameraId>>,
    front_timestamp: Option<u64>,
}

impl<T: Real> EnvironmentMap<T> {
    /// Empty (fully unobserved, black) map of the given height.
    pub fn new(height_px: u32) -> Result<Self> {
        if height_px == 0 {
            return Err(Error::invalid("environment map height must be positive"));
        }
        let n = 2 * height_px as usize * height_px as usize;
        Ok(Self {
            texels: Image::new(2 * height_px, height_px),
            observed: vec![false; n],
            updated_at: vec![0; n],
            writer: vec![None; n],
            front_timestamp: None,
        })
    }

    /// Wraps an image as a fully observed map.
    pub fn from_image(image: Image<T>, timestamp_ms: u64) -> Result<Self> {
        let mask = vec![true; image.pixels().len()];
        Self::from_parts(image, mask, timestamp_ms)
    }

    /// Builds a map from texels and an observed mask; unobserved texels are
    /// reset to black.
    pub fn from_parts(mut image: Image<T>, observed: Vec<bool>, timestamp_ms: u64) -> Result<Self> {
        if image.width() != 2 * image.height() || image.height() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "environment map must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if observed.len() != image.pixels().len() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries for {} texels",
                observed.len(),
                image.pixels().len()
            )));
        }
        for (px, &obs) in image.pixels_mut().iter_mut().zip(&observed) {
            if !obs {
                *px = [T::zero(); 3];
            }
        }
        let updated_at = observed.iter().map(|&o| if o { timestamp_ms } else { 0 }).collect();
        let n = observed.len();
        Ok(Self { texels: image, observed, updated_at, writer: vec![None; n], front_timestamp: None })
    }

    pub fn width(&self) -> u32 {
        self.texels.width()
    }

    pub fn height(&self) -> u32 {
        self.texels.height()
    }

    pub fn texels(&self) -> &Image<T> {
        &self.texels
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    /// Per-texel write time in ms, 0 when never written.
    pub fn updated_at(&self) -> &[u64] {
        &self.updated_at
    }

    /// Camera that last wrote each texel.
    pub fn writer(&self) -> &[Option<CameraId>] {
        &self.writer
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn observed_fraction(&self) -> f64 {
        self.observed_count() as f64 / self.observed.len() as f64
    }

    /// Direction through the center of texel `(x, y)`.
    pub fn texel_direction(&self, x: u32, y: u32) -> UnitDirection<T> {
        let u = (T::from(x).unwrap() + T::lit(0.5)) / T::from(self.width()).unwrap();
        let v = (T::from(y).unwrap() + T::lit(0.5)) / T::from(self.height()).unwrap();
        equirect_to_dir_unchecked(u, v)
    }

    /// Solid angle of a texel in row `y`, steradians.
    pub fn texel_solid_angle(&self, y: u32) -> T {
        texel_solid_angle(self.width(), self.height(), y)
    }

    /// Bilinear sample with horizontal wrap and vertical clamp. Unobserved
    /// texels contribute their stored value.
    pub fn sample(&self, d: &UnitDirection<T>) -> Rgb<T> {
        self.texels.sample_direction(d)
    }

    /// Overwrites one texel and marks it observed. Intended for building maps
    /// directly rather than through frames.
    pub fn write_texel(&mut self, x: u32, y: u32, value: Rgb<T>, timestamp_ms: u64, camera: Option<CameraId>) {
        let i = self.texels.index(x, y);
        self.texels.pixels_mut()[i] = value;
        self.observed[i] = true;
        self.updated_at[i] = timestamp_ms;
        self.writer[i] = camera;
    }

    /// Writes a texel value without touching the observed mask.
    pub(crate) fn fill_texel(&mut self, i: usize, value: Rgb<T>) {
        self.texels.pixels_mut()[i] = value;
    }

    pub fn clear_texel(&mut self, x: u32, y: u32) {
        let i = self.texels.index(x, y);
        self.clear_index(i);
    }

    fn clear_index(&mut self, i: usize) {
        self.texels.pixels_mut()[i] = [T::zero(); 3];
        self.observed[i] = false;
        self.updated_at[i] = 0;
        self.writer[i] = None;
    }

    /// Gathers `frame` into every texel whose center lies inside its frustum,
    /// unconditionally. Texels outside the frustum are untouched.
    pub fn project_frame(&mut self, frame: &Frame<T>) {
        self.gather(frame, |_, _, _, _| true);
    }

    /// Merges a frame under the given rule.
    ///
    /// With [`MergeMode::NewestWins`] a texel is overwritten only by a frame at
    /// least as new as its current data. With [`MergeMode::CurrentOnly`] every
    /// texel previously written by the same camera is cleared first, so only
    /// the current frame survives; stale frames are ignored. At equal
    /// timestamps, back-camera data is never replaced by front-camera data.
    pub fn merge_frame(&mut self, frame: &Frame<T>, mode: MergeMode) {
        let ts = frame.timestamp_ms;
        if mode == MergeMode::CurrentOnly {
            if self.front_timestamp.is_some_and(|last| ts < last) {
                return;
            }
            for i in 0..self.observed.len() {
                if self.writer[i] == Some(frame.camera_id) && self.updated_at[i] < ts {
                    self.clear_index(i);
                }
            }
            self.front_timestamp = Some(ts);
        }
        let incoming_front = frame.camera_id.is_front();
        self.gather(frame, |observed, updated, writer, ts| {
            if !observed {
                return true;
            }
            if updated > ts {
                return false;
            }
            let back_texel = writer.is_some_and(|w| !w.is_front());
            !(incoming_front && back_texel && updated == ts)
        });
    }

    fn gather(&mut self, frame: &Frame<T>, accept: impl Fn(bool, u64, Option<CameraId>, u64) -> bool) {
        let (w, h) = (self.width(), self.height());
        let rows = row_trig::<T>(h);
        let cols = col_trig::<T>(w);
        let rot = frame.pose.rotation;
        let forward = rot.rotate(Vec3::new(T::zero(), T::zero(), -T::one()));
        // Slightly loose so texels on the frustum corners are still tested exactly.
        let cos_limit = (frame.intrinsics.corner_half_angle() + T::lit(1e-6)).cos();
        let ts = frame.timestamp_ms;
        for (y, &(st, ct)) in rows.iter().enumerate() {
            for (x, &(sp, cp)) in cols.iter().enumerate() {
                let d = Vec3::new(st * sp, ct, -st * cp);
                if d.dot(forward) < cos_limit {
                    continue;
                }
                let Some((px, py)) = project_local(&frame.intrinsics, rot.unrotate(d)) else {
                    continue;
                };
                let i = y * w as usize + x;
                if !accept(self.observed[i], self.updated_at[i], self.writer[i], ts) {
                    continue;
                }
                self.texels.pixels_mut()[i] = frame.image.sample_bilinear(px, py);
                self.observed[i] = true;
                self.updated_at[i] = ts;
                self.writer[i] = Some(frame.camera_id);
            }
        }
    }
}

/// `(sin θ, cos θ)` of each texel row center.
pub(crate) fn row_trig<T: Real>(height: u32) -> Vec<(T, T)> {
    let h = T::from(height).unwrap();
    (0..height)
        .map(|y| ((T::from(y).unwrap() + T::lit(0.5)) / h * T::PI()).sin_cos())
        .collect()
}

/// `(sin φ, cos φ)` of each texel column center.
pub(crate) fn col_trig<T: Real>(width: u32) -> Vec<(T, T)> {
    let w = T::from(width).unwrap();
    (0..width)
        .map(|x| (((T::from(x).unwrap() + T::lit(0.5)) / w - T::lit(0.5)) * T::lit(2.0) * T::PI()).sin_cos())
        .collect()
}

/// Exact solid angle of an equirectangular cell in row `y`.
pub(crate) fn texel_solid_angle<T: Real>(width: u32, height: u32, y: u32) -> T {
    let h = T::from(height).unwrap();
    let t0 = T::from(y).unwrap() / h * T::PI();
    let t1 = T::from(y + 1).unwrap() / h * T::PI();
    T::lit(2.0) * T::PI() / T::from(width).unwrap() * (t0.cos() - t1.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{direction_to_pixel, intrinsics_from_fov, Rotation};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn const_frame(c: Rgb<f64>, camera: CameraId, pose: DevicePose<f64>, ts: u64) -> Frame<f64> {
        let intr = intrinsics_from_fov(camera.default_h_fov_deg(), 64, 48).unwrap();
        Frame::new(Image::filled(64, 48, c), intr, pose, camera, ts).unwrap()
    }

    fn yawed(deg: f64) -> DevicePose<f64> {
        DevicePose::from_rotation(Rotation::yaw(deg.to_radians()))
    }

    #[test]
    fn constant_frame_fills_frustum_only() {
        let mut env = EnvironmentMap::<f64>::new(64).unwrap();
        let f = const_frame([0.2, 0.4, 0.6], CameraId::BackWide, DevicePose::identity(), 5);
        env.project_frame(&f);
        for y in 0..env.height() {
            for x in 0..env.width() {
                let i = env.texels().index(x, y);
                let visible = direction_to_pixel(&f.intrinsics, &f.pose, &env.texel_direction(x, y)).is_some();
                assert_eq!(env.observed()[i], visible, "texel ({x}, {y})");
                if visible {
                    assert_eq!(env.texels().get(x, y), [0.2, 0.4, 0.6]);
                    assert_eq!(env.updated_at()[i], 5);
                } else {
                    assert_eq!(env.texels().get(x, y), [0.0; 3]);
                }
            }
        }
    }

    #[test]
    fn disjoint_back_frames_union() {
        let mut env = EnvironmentMap::<f64>::new(64).unwrap();
        let a = const_frame([1.0; 3], CameraId::BackWide, yawed(-90.0), 1);
        let b = const_frame([0.5; 3], CameraId::BackWide, yawed(90.0), 2);
        let mut only_a = env.clone();
        only_a.merge_frame(&a, MergeMode::NewestWins);
        let mut only_b = env.clone();
        only_b.merge_frame(&b, MergeMode::NewestWins);
        env.merge_frame(&a, MergeMode::NewestWins);
        env.merge_frame(&b, MergeMode::NewestWins);
        assert_eq!(env.observed_count(), only_a.observed_count() + only_b.observed_count());
    }

    #[test]
    fn newer_back_frame_wins_overlap() {
        let mut env = EnvironmentMap::<f64>::new(64).unwrap();
        let old = const_frame([1.0, 0.0, 0.0], CameraId::BackWide, DevicePose::identity(), 10);
        let new = const_frame([0.0, 1.0, 0.0], CameraId::BackWide, yawed(10.0), 20);
        env.merge_frame(&old, MergeMode::NewestWins);
        env.merge_frame(&new, MergeMode::NewestWins);
        let c = env.sample(&UnitDirection::forward());
        assert_eq!(c, [0.0, 1.0, 0.0]);
        // an out-of-order stale frame does not overwrite newer texels
        env.merge_frame(&old, MergeMode::NewestWins);
        assert_eq!(env.sample(&UnitDirection::forward()), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn front_keeps_only_current_frame() {
        let mut env = EnvironmentMap::<f64>::new(64).unwrap();
        let f1 = const_frame([0.3; 3], CameraId::Front, DevicePose::identity().camera_pose(CameraId::Front), 1);
        let f2 = const_frame([0.7; 3], CameraId::Front, yawed(40.0).camera_pose(CameraId::Front), 2);
        env.merge_frame(&f1, MergeMode::CurrentOnly);
        env.merge_frame(&f2, MergeMode::CurrentOnly);
        for i in 0..env.observed().len() {
            if env.writer()[i] == Some(CameraId::Front) {
                assert_eq!(env.updated_at()[i], 2);
            }
            assert_ne!(env.updated_at()[i], 1);
        }
        let mut only2 = EnvironmentMap::new(64).unwrap();
        only2.merge_frame(&f2, MergeMode::CurrentOnly);
        assert_eq!(env, only2);
        // a stale front frame is ignored entirely
        env.merge_frame(&f1, MergeMode::CurrentOnly);
        assert_eq!(env, only2);
    }

    #[test]
    fn back_wins_ties_against_front() {
        let mut env = EnvironmentMap::<f64>::new(64).unwrap();
        // Front camera pointed forward overlaps the back camera's frustum.
        let back = const_frame([1.0; 3], CameraId::BackWide, DevicePose::identity(), 7);
        let front = const_frame([0.1; 3], CameraId::Front, DevicePose::identity(), 7);
        env.merge_frame(&back, MergeMode::NewestWins);
        env.merge_frame(&front, MergeMode::CurrentOnly);
        assert_eq!(env.sample(&UnitDirection::forward()), [1.0; 3]);
        // but a later front frame does overwrite
        let later = const_frame([0.1; 3], CameraId::Front, DevicePose::identity(), 8);
        env.merge_frame(&later, MergeMode::CurrentOnly);
        assert_eq!(env.sample(&UnitDirection::forward()), [0.1; 3]);
    }

    #[test]
    fn sample_constant_and_texel_center() {
        let img = Image::from_fn(16, 8, |x, y| [x as f64 / 16.0, y as f64 / 8.0, 0.5]);
        let env = EnvironmentMap::from_image(img.clone(), 1).unwrap();
        for (x, y) in [(0, 0), (5, 3), (15, 7)] {
            let c = env.sample(&env.texel_direction(x, y));
            let e = img.get(x, y);
            for k in 0..3 {
                assert_abs_diff_eq!(c[k], e[k], epsilon = 1e-9);
            }
        }
        let flat = EnvironmentMap::from_image(Image::filled(16, 8, [0.3f64; 3]), 1).unwrap();
        let d = UnitDirection::new(0.3, -0.2, 0.9).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(flat.sample(&d)[k], 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn seam_sampling_is_continuous() {
        // A gradient in u that straddles the seam through the first and last columns.
        let w = 64u32;
        let img = Image::from_fn(w, 32, |x, _| {
            let u = (x as f64 + 0.5) / w as f64;
            [(2.0 * std::f64::consts::PI * u).cos(); 3]
        });
        let env = EnvironmentMap::from_image(img, 1).unwrap();
        let eps = 1e-7;
        let a = env.texels().sample_equirect(1.0 - eps, 0.5);
        let b = env.texels().sample_equirect(eps, 0.5);
        // slope of the bilinear interpolant is bounded by the texel gradient
        assert!((a[0] - b[0]).abs() < 2.0 * eps * 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn solid_angles_sum_to_sphere() {
        let total: f64 = (0..32).map(|y| 64.0 * texel_solid_angle::<f64>(64, 32, y)).sum();
        assert_abs_diff_eq!(total, 4.0 * std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn from_parts_blacks_out_unobserved() {
        let img = Image::filled(4, 2, [0.5f64; 3]);
        let mask = vec![true, false, true, false, true, false, true, false];
        let env = EnvironmentMap::from_parts(img, mask, 3).unwrap();
        assert_eq!(env.texels().get(1, 0), [0.0; 3]);
        assert_eq!(env.updated_at()[0], 3);
        assert_eq!(env.updated_at()[1], 0);
        assert!(EnvironmentMap::from_parts(Image::filled(3, 2, [0.0f64; 3]), vec![true; 6], 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn merge_is_idempotent_and_monotone(yaws in proptest::collection::vec(-180.0..180.0f64, 1..5), again in 0usize..4) {
            let mut env = EnvironmentMap::<f64>::new(32).unwrap();
            let mut count = 0;
            let mut frames = Vec::new();
            for (k, yaw) in yaws.iter().enumerate() {
                let f = const_frame([k as f64 / 5.0; 3], CameraId::BackUltrawide, yawed(*yaw), k as u64 + 1);
                env.merge_frame(&f, MergeMode::NewestWins);
                prop_assert!(env.observed_count() >= count);
                count = env.observed_count();
                frames.push(f);
            }
            let last = frames.last().unwrap().clone();
            let before = env.clone();
            env.merge_frame(&last, MergeMode::NewestWins);
            prop_assert_eq!(&env, &before);
            let earlier = &frames[again.min(frames.len() - 1)];
            env.merge_frame(earlier, MergeMode::NewestWins);
            prop_assert!(env.observed_count() >= count);
        }

        #[test]
        fn at_most_one_front_timestamp(seq in proptest::collection::vec((-60.0..60.0f64, 0u64..50, proptest::bool::ANY), 1..8)) {
            let mut env = EnvironmentMap::<f64>::new(32).unwrap();
            for (yaw, ts, front) in seq {
                let cam = if front { CameraId::Front } else { CameraId::BackWide };
                let pose = yawed(yaw).camera_pose(cam);
                let f = const_frame([0.5; 3], cam, pose, ts);
                env.merge_frame(&f, MergeMode::for_camera(cam));
                let mut stamps: Vec<u64> = env
                    .writer()
                    .iter()
                    .zip(env.updated_at())
                    .filter(|(w, _)| **w == Some(CameraId::Front))
                    .map(|(_, &t)| t)
                    .collect();
                stamps.sort_unstable();
                stamps.dedup();
                prop_assert!(stamps.len() <= 1);
            }
        }
    }
}
