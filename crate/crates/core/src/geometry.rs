//! Directions, rotations, pinhole projection and the equirectangular parameterization.
//!
//! World frame is right-handed with +y up. A camera looks down its local −z axis,
//! with +x to the right and +y up in the image. Equirectangular coordinate
//! `(0.5, 0.5)` is the world forward direction `(0, 0, −1)`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// A direction on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitDirection<T>(Vec3<T>);

impl<T: Real> UnitDirection<T> {
    /// Normalizes `(x, y, z)`. Fails on zero-length or non-finite input.
    pub fn new(x: T, y: T, z: T) -> Result<Self> {
        Self::from_vec(Vec3::new(x, y, z))
    }

    pub fn from_vec(v: Vec3<T>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n <= T::epsilon() {
            return Err(Error::invalid(format!(
                "cannot normalize vector ({}, {}, {})",
                v.x, v.y, v.z
            )));
        }
        Ok(Self(v.scale(T::one() / n)))
    }

    /// Normalizes without checking; caller guarantees a non-zero finite vector.
    pub(crate) fn normalize_unchecked(v: Vec3<T>) -> Self {
        Self(v.scale(T::one() / v.norm()))
    }

    pub fn forward() -> Self {
        Self(Vec3::new(T::zero(), T::zero(), -T::one()))
    }

    pub fn up() -> Self {
        Self(Vec3::new(T::zero(), T::one(), T::zero()))
    }

    pub fn x(&self) -> T {
        self.0.x
    }
    pub fn y(&self) -> T {
        self.0.y
    }
    pub fn z(&self) -> T {
        self.0.z
    }

    pub fn as_vec(&self) -> Vec3<T> {
        self.0
    }

    pub fn dot(&self, o: &Self) -> T {
        self.0.dot(o.0)
    }

    /// Angle between two directions in radians, stable near 0 and π.
    pub fn angle_to(&self, o: &Self) -> T {
        self.0.cross(o.0).norm().atan2(self.0.dot(o.0))
    }
}

/// Proper rotation stored as a row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation<T> {
    m: [[T; 3]; 3],
}

impl<T: Real> Rotation<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self { m: [[o, z, z], [z, o, z], [z, z, o]] }
    }

    /// Accepts a matrix only if it is orthonormal with determinant +1 within `1e-9`
    /// (`1e-5` for single precision).
    pub fn from_matrix(m: [[T; 3]; 3]) -> Result<Self> {
        let r = Self { m };
        let tol = if std::mem::size_of::<T>() <= 4 { T::lit(1e-5) } else { T::lit(1e-9) };
        if !r.is_orthonormal(tol) || (r.determinant() - T::one()).abs() > tol {
            return Err(Error::invalid("matrix is not a proper rotation"));
        }
        Ok(r)
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        self.m
    }

    /// Rodrigues' formula.
    pub fn from_axis_angle(axis: &UnitDirection<T>, angle_rad: T) -> Self {
        let (s, c) = angle_rad.sin_cos();
        let t = T::one() - c;
        let (x, y, z) = (axis.x(), axis.y(), axis.z());
        Self {
            m: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        }
    }

    /// Rotation about +y. Positive yaw turns the forward axis (−z) towards −x.
    pub fn yaw(angle_rad: T) -> Self {
        let (s, c) = angle_rad.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self { m: [[c, z, s], [z, o, z], [-s, z, c]] }
    }

    /// Rotation about +x. Positive pitch turns the forward axis upward.
    pub fn pitch(angle_rad: T) -> Self {
        let (s, c) = angle_rad.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self { m: [[o, z, z], [z, c, -s], [z, s, c]] }
    }

    /// Rotation about +z.
    pub fn roll(angle_rad: T) -> Self {
        let (s, c) = angle_rad.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self { m: [[c, -s, z], [s, c, z], [z, z, o]] }
    }

    /// `yaw · pitch · roll`, angles in degrees.
    pub fn from_yaw_pitch_roll_deg(yaw: T, pitch: T, roll: T) -> Self {
        Self::yaw(yaw.to_radians())
            .compose(&Self::pitch(pitch.to_radians()))
            .compose(&Self::roll(roll.to_radians()))
    }

    pub fn rotate(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn rotate_dir(&self, d: &UnitDirection<T>) -> UnitDirection<T> {
        UnitDirection(self.rotate(d.as_vec()))
    }

    /// Applies the inverse rotation.
    pub fn unrotate(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }

    /// `self · other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).fold(T::zero(), |acc, k| acc + self.m[i][k] * other.m[k][j]);
            }
        }
        Self { m }
    }

    pub fn inverse(&self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[j][i];
            }
        }
        Self { m }
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_orthonormal(&self, tol: T) -> bool {
        let p = self.compose(&self.inverse());
        (0..3).all(|i| {
            (0..3).all(|j| {
                let e = if i == j { T::one() } else { T::zero() };
                (p.m[i][j] - e).abs() <= tol
            })
        })
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> T {
        let m = &self.m;
        // sin θ from the skew part, cos θ from the trace.
        let sx = m[2][1] - m[1][2];
        let sy = m[0][2] - m[2][0];
        let sz = m[1][0] - m[0][1];
        let s = (sx * sx + sy * sy + sz * sz).sqrt() * T::lit(0.5);
        let c = (m[0][0] + m[1][1] + m[2][2] - T::one()) * T::lit(0.5);
        s.atan2(c)
    }

    /// Angle of the relative rotation `self⁻¹ · other`, radians.
    pub fn angle_to(&self, other: &Self) -> T {
        self.inverse().compose(other).angle()
    }
}

impl<T: Real> Mul for Rotation<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.compose(&o)
    }
}

/// Pinhole intrinsics given by fields of view and image size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics<T> {
    h_fov_deg: T,
    v_fov_deg: T,
    width_px: u32,
    height_px: u32,
}

impl<T: Real> CameraIntrinsics<T> {
    /// Derives the vertical FoV from the horizontal one and the aspect ratio
    /// (square pixels).
    pub fn from_fov(h_fov_deg: T, width_px: u32, height_px: u32) -> Result<Self> {
        check_fov(h_fov_deg, "horizontal")?;
        check_dims(width_px, height_px)?;
        let aspect = T::from(height_px).unwrap() / T::from(width_px).unwrap();
        let half_h = (h_fov_deg * T::lit(0.5)).to_radians();
        let v_fov_deg = (T::lit(2.0) * (aspect * half_h.tan()).atan()).to_degrees();
        Ok(Self { h_fov_deg, v_fov_deg, width_px, height_px })
    }

    /// Both fields of view given explicitly; pixels may be non-square.
    pub fn new(h_fov_deg: T, v_fov_deg: T, width_px: u32, height_px: u32) -> Result<Self> {
        check_fov(h_fov_deg, "horizontal")?;
        check_fov(v_fov_deg, "vertical")?;
        check_dims(width_px, height_px)?;
        Ok(Self { h_fov_deg, v_fov_deg, width_px, height_px })
    }

    pub fn h_fov_deg(&self) -> T {
        self.h_fov_deg
    }
    pub fn v_fov_deg(&self) -> T {
        self.v_fov_deg
    }
    pub fn width_px(&self) -> u32 {
        self.width_px
    }
    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    pub fn width(&self) -> T {
        T::from(self.width_px).unwrap()
    }

    pub fn height(&self) -> T {
        T::from(self.height_px).unwrap()
    }

    /// Focal length in pixels along x.
    pub fn fx(&self) -> T {
        self.width() * T::lit(0.5) / (self.h_fov_deg * T::lit(0.5)).to_radians().tan()
    }

    /// Focal length in pixels along y.
    pub fn fy(&self) -> T {
        self.height() * T::lit(0.5) / (self.v_fov_deg * T::lit(0.5)).to_radians().tan()
    }

    /// Half-angle of the frustum's corner ray from the optical axis, radians.
    pub fn corner_half_angle(&self) -> T {
        let tx = (self.h_fov_deg * T::lit(0.5)).to_radians().tan();
        let ty = (self.v_fov_deg * T::lit(0.5)).to_radians().tan();
        (tx * tx + ty * ty).sqrt().atan()
    }

    /// Analytic solid angle of the rectangular frustum, steradians.
    pub fn solid_angle(&self) -> T {
        let a = (self.h_fov_deg * T::lit(0.5)).to_radians();
        let b = (self.v_fov_deg * T::lit(0.5)).to_radians();
        T::lit(4.0) * (a.sin() * b.sin()).asin()
    }
}

fn check_fov<T: Real>(fov: T, which: &str) -> Result<()> {
    if !(fov > T::zero() && fov < T::lit(180.0)) {
        return Err(Error::invalid(format!("{which} FoV {fov} outside (0, 180) degrees")));
    }
    Ok(())
}

fn check_dims(w: u32, h: u32) -> Result<()> {
    if w == 0 || h == 0 {
        return Err(Error::invalid(format!("image size {w}x{h} must be non-zero")));
    }
    Ok(())
}

/// Convenience wrapper for [`CameraIntrinsics::from_fov`].
pub fn intrinsics_from_fov<T: Real>(
    h_fov_deg: T,
    width_px: u32,
    height_px: u32,
) -> Result<CameraIntrinsics<T>> {
    CameraIntrinsics::from_fov(h_fov_deg, width_px, height_px)
}

/// Orientation plus position. Projection reads only the rotation; all cameras
/// share one optical center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DevicePose<T> {
    pub rotation: Rotation<T>,
    pub position: Vec3<T>,
}

impl<T: Real> DevicePose<T> {
    pub fn identity() -> Self {
        Self { rotation: Rotation::identity(), position: Vec3::zero() }
    }

    pub fn from_rotation(rotation: Rotation<T>) -> Self {
        Self { rotation, position: Vec3::zero() }
    }

    /// Pose of a camera mounted on this device.
    pub fn camera_pose(&self, camera: CameraId) -> Self {
        Self { rotation: self.rotation.compose(&camera.mount()), position: self.position }
    }
}

/// The three physical cameras of the simulated phone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraId {
    Front,
    BackWide,
    BackUltrawide,
}

impl CameraId {
    pub const ALL: [CameraId; 3] = [CameraId::Front, CameraId::BackWide, CameraId::BackUltrawide];

    pub fn is_front(self) -> bool {
        self == CameraId::Front
    }

    /// Camera-from-device rotation. Back cameras look along the device's −z,
    /// the front camera along +z.
    pub fn mount<T: Real>(self) -> Rotation<T> {
        match self {
            CameraId::Front => Rotation::yaw(T::PI()),
            CameraId::BackWide | CameraId::BackUltrawide => Rotation::identity(),
        }
    }

    /// Horizontal field of view of the reference handset.
    pub fn default_h_fov_deg(self) -> f64 {
        match self {
            CameraId::Front => 70.0,
            CameraId::BackWide => 75.0,
            CameraId::BackUltrawide => 120.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CameraId::Front => "front",
            CameraId::BackWide => "back_wide",
            CameraId::BackUltrawide => "back_ultrawide",
        }
    }
}

impl std::fmt::Display for CameraId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CameraId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "front" => Ok(CameraId::Front),
            "back_wide" => Ok(CameraId::BackWide),
            "back_ultrawide" => Ok(CameraId::BackUltrawide),
            _ => Err(Error::invalid(format!("unknown camera id `{s}`"))),
        }
    }
}

/// Unprojects continuous pixel coordinates (origin top-left, y down) to a
/// world-space direction. `pose` is the camera's pose.
pub fn pixel_to_direction<T: Real>(
    intr: &CameraIntrinsics<T>,
    pose: &DevicePose<T>,
    px: (T, T),
) -> Result<UnitDirection<T>> {
    let (x, y) = px;
    if !(x >= T::zero() && x <= intr.width() && y >= T::zero() && y <= intr.height()) {
        return Err(Error::OutOfBounds {
            x: x.as_f64(),
            y: y.as_f64(),
            width: intr.width_px(),
            height: intr.height_px(),
        });
    }
    let half = T::lit(0.5);
    let local = Vec3::new(
        (x - intr.width() * half) / intr.fx(),
        (intr.height() * half - y) / intr.fy(),
        -T::one(),
    );
    Ok(UnitDirection::normalize_unchecked(pose.rotation.rotate(local)))
}

/// Projects a world direction into the image; `None` when outside the frustum.
pub fn direction_to_pixel<T: Real>(
    intr: &CameraIntrinsics<T>,
    pose: &DevicePose<T>,
    d: &UnitDirection<T>,
) -> Option<(T, T)> {
    project_local(intr, pose.rotation.unrotate(d.as_vec()))
}

#[inline]
pub(crate) fn project_local<T: Real>(intr: &CameraIntrinsics<T>, local: Vec3<T>) -> Option<(T, T)> {
    if local.z >= T::zero() {
        return None;
    }
    let depth = -local.z;
    let half = T::lit(0.5);
    let x = intr.width() * half + intr.fx() * local.x / depth;
    let y = intr.height() * half - intr.fy() * local.y / depth;
    if x >= T::zero() && x <= intr.width() && y >= T::zero() && y <= intr.height() {
        Some((x, y))
    } else {
        None
    }
}

/// Maps a direction to equirectangular `(u, v)`, `u ∈ [0, 1)`, `v ∈ [0, 1]`.
pub fn dir_to_equirect<T: Real>(d: &UnitDirection<T>) -> (T, T) {
    // 0 − z keeps the pole at atan2(0, +0) = 0 instead of picking up −0.0.
    let phi = d.x().atan2(T::zero() - d.z());
    let theta = d.y().max(-T::one()).min(T::one()).acos();
    let mut u = phi / (T::lit(2.0) * T::PI()) + T::lit(0.5);
    if u >= T::one() {
        u -= T::one();
    }
    if u < T::zero() {
        u = T::zero();
    }
    (u, theta / T::PI())
}

/// Inverse of [`dir_to_equirect`].
pub fn equirect_to_dir<T: Real>(u: T, v: T) -> Result<UnitDirection<T>> {
    if !(u >= T::zero() && u < T::one() && v >= T::zero() && v <= T::one()) {
        return Err(Error::invalid(format!("equirect coords ({u}, {v}) out of range")));
    }
    Ok(equirect_to_dir_unchecked(u, v))
}

#[inline]
pub(crate) fn equirect_to_dir_unchecked<T: Real>(u: T, v: T) -> UnitDirection<T> {
    let phi = (u - T::lit(0.5)) * T::lit(2.0) * T::PI();
    let theta = v * T::PI();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    UnitDirection(Vec3::new(st * sp, ct, -st * cp))
}

/// Device pose on a horizontal arc of radius `arm_length_m` around the head at
/// the origin. Azimuth runs linearly over `[−sweep/2, +sweep/2]` as `t` goes
/// from 0 to 1; the front camera always faces the origin.
pub fn great_circle_pose<T: Real>(t: T, arm_length_m: T, sweep_deg: T) -> Result<DevicePose<T>> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::invalid(format!("trajectory parameter {t} outside [0, 1]")));
    }
    if !(arm_length_m > T::zero()) || !arm_length_m.is_finite() {
        return Err(Error::invalid(format!("arm length {arm_length_m} must be positive")));
    }
    if !(sweep_deg > T::zero() && sweep_deg <= T::lit(180.0)) {
        return Err(Error::invalid(format!("sweep {sweep_deg} outside (0, 180] degrees")));
    }
    let azimuth = ((t - T::lit(0.5)) * sweep_deg).to_radians();
    let rotation = Rotation::yaw(azimuth);
    let position = rotation.rotate(Vec3::new(T::zero(), T::zero(), -arm_length_m));
    Ok(DevicePose { rotation, position })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn intrinsics_examples() {
        let sq = intrinsics_from_fov(90.0f64, 100, 100).unwrap();
        assert_abs_diff_eq!(sq.v_fov_deg(), 90.0, epsilon = 1e-9);

        // 2·atan(0.75·tan 60°) and 2·atan(0.75·tan 35°), evaluated by hand.
        let ultra = intrinsics_from_fov(120.0f64, 400, 300).unwrap();
        let expected = 2.0 * (0.75f64 * 60f64.to_radians().tan()).atan().to_degrees();
        assert_abs_diff_eq!(ultra.v_fov_deg(), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(ultra.v_fov_deg(), 104.84, epsilon = 0.05);
        let front = intrinsics_from_fov(70.0f64, 400, 300).unwrap();
        assert_abs_diff_eq!(front.v_fov_deg(), 55.46, epsilon = 0.05);
        // square pixels
        assert_abs_diff_eq!(front.fx(), front.fy(), epsilon = 1e-9);
    }

    #[test]
    fn intrinsics_reject_bad_input() {
        assert!(intrinsics_from_fov(0.0f64, 4, 3).is_err());
        assert!(intrinsics_from_fov(180.0f64, 4, 3).is_err());
        assert!(intrinsics_from_fov(f64::NAN, 4, 3).is_err());
        assert!(intrinsics_from_fov(70.0f64, 0, 3).is_err());
        assert!(intrinsics_from_fov(70.0f64, 4, 0).is_err());
    }

    #[test]
    fn center_pixel_is_optical_axis() {
        let intr = intrinsics_from_fov(70.0f64, 640, 480).unwrap();
        let d = pixel_to_direction(&intr, &DevicePose::identity(), (320.0, 240.0)).unwrap();
        assert_abs_diff_eq!(d.z(), -1.0, epsilon = 1e-12);
        let px = direction_to_pixel(&intr, &DevicePose::identity(), &UnitDirection::forward()).unwrap();
        assert_abs_diff_eq!(px.0, 320.0, epsilon = 1e-9);
        assert_abs_diff_eq!(px.1, 240.0, epsilon = 1e-9);
    }

    #[test]
    fn right_edge_is_half_fov() {
        let intr = intrinsics_from_fov(90.0f64, 200, 100).unwrap();
        let d = pixel_to_direction(&intr, &DevicePose::identity(), (200.0, 50.0)).unwrap();
        assert_abs_diff_eq!(d.y(), 0.0, epsilon = 1e-12);
        let azimuth = d.x().atan2(-d.z()).to_degrees();
        assert_abs_diff_eq!(azimuth, 45.0, epsilon = 1e-9);
    }

    #[test]
    fn behind_camera_is_not_visible() {
        let intr = intrinsics_from_fov(120.0f64, 64, 48).unwrap();
        let back = UnitDirection::new(0.0, 0.0, 1.0).unwrap();
        assert!(direction_to_pixel(&intr, &DevicePose::identity(), &back).is_none());
    }

    #[test]
    fn out_of_image_pixel_is_an_error() {
        let intr = intrinsics_from_fov(70.0f64, 64, 48).unwrap();
        let err = pixel_to_direction(&intr, &DevicePose::identity(), (64.5, 10.0));
        assert!(matches!(err, Err(Error::OutOfBounds { .. })));
        assert!(pixel_to_direction(&intr, &DevicePose::identity(), (-0.1, 10.0)).is_err());
    }

    #[test]
    fn equirect_conventions() {
        let (u, v) = dir_to_equirect(&UnitDirection::<f64>::forward());
        assert_abs_diff_eq!(u, 0.5);
        assert_abs_diff_eq!(v, 0.5);
        let (u, v) = dir_to_equirect(&UnitDirection::<f64>::up());
        assert_abs_diff_eq!(u, 0.5);
        assert_abs_diff_eq!(v, 0.0);
        let d = equirect_to_dir(0.5f64, 0.0).unwrap();
        assert_abs_diff_eq!(d.y(), 1.0, epsilon = 1e-12);
        // +x sits a quarter turn to the right of forward
        let (u, _) = dir_to_equirect(&UnitDirection::new(1.0f64, 0.0, 0.0).unwrap());
        assert_abs_diff_eq!(u, 0.75, epsilon = 1e-12);
        // −z seam direction maps into [0, 1)
        let (u, _) = dir_to_equirect(&UnitDirection::new(-0.0f64, 0.0, 1.0).unwrap());
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn equirect_rejects_out_of_range() {
        assert!(equirect_to_dir(1.0f64, 0.5).is_err());
        assert!(equirect_to_dir(-0.01f64, 0.5).is_err());
        assert!(equirect_to_dir(0.5f64, 1.01).is_err());
    }

    #[test]
    fn great_circle_midpoint_and_symmetry() {
        let mid = great_circle_pose(0.5f64, 0.6, 60.0).unwrap();
        assert!(mid.rotation.angle() < 1e-12);
        assert_abs_diff_eq!(mid.position.z, -0.6, epsilon = 1e-12);

        let a = great_circle_pose(0.0f64, 0.6, 60.0).unwrap();
        let b = great_circle_pose(1.0f64, 0.6, 60.0).unwrap();
        // Mirror about the x = 0 plane: S·Ra·S = Rb with S = diag(−1, 1, 1).
        let (ma, mb) = (a.rotation.matrix(), b.rotation.matrix());
        let s = [-1.0, 1.0, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(s[i] * ma[i][j] * s[j], mb[i][j], epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(a.rotation.angle().to_degrees(), 30.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b.rotation.angle().to_degrees(), 30.0, epsilon = 1e-9);
        assert_abs_diff_eq!(a.position.x, -b.position.x, epsilon = 1e-12);
    }

    #[test]
    fn great_circle_rejects_bad_args() {
        assert!(great_circle_pose(1.5f64, 0.6, 60.0).is_err());
        assert!(great_circle_pose(0.5f64, 0.0, 60.0).is_err());
        assert!(great_circle_pose(0.5f64, 0.6, 0.0).is_err());
        assert!(great_circle_pose(0.5f64, 0.6, 181.0).is_err());
    }

    #[test]
    fn rotation_from_matrix_validates() {
        let r = Rotation::<f64>::from_yaw_pitch_roll_deg(10.0, 20.0, 30.0);
        assert!(Rotation::from_matrix(r.matrix()).is_ok());
        let mut bad = r.matrix();
        bad[0][0] *= -1.0;
        assert!(Rotation::from_matrix(bad).is_err());
        let mirror = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(Rotation::from_matrix(mirror).is_err());
    }

    #[test]
    fn single_precision_round_trip() {
        let intr = intrinsics_from_fov(75.0f32, 320, 240).unwrap();
        let d = pixel_to_direction(&intr, &DevicePose::identity(), (17.25, 201.5)).unwrap();
        let (x, y) = direction_to_pixel(&intr, &DevicePose::identity(), &d).unwrap();
        assert!((x - 17.25).abs() < 1e-3 && (y - 201.5).abs() < 1e-3);
    }

    fn arb_rotation() -> impl Strategy<Value = Rotation<f64>> {
        (-180.0..180.0f64, -89.0..89.0f64, -180.0..180.0f64)
            .prop_map(|(y, p, r)| Rotation::from_yaw_pitch_roll_deg(y, p, r))
    }

    proptest! {
        #[test]
        fn pixel_direction_round_trip(
            rot in arb_rotation(),
            hfov in 20.0..150.0f64,
            fx in 0.0..1.0f64,
            fy in 0.0..1.0f64,
        ) {
            let intr = intrinsics_from_fov(hfov, 640, 480).unwrap();
            let pose = DevicePose::from_rotation(rot);
            let px = (fx * 640.0, fy * 480.0);
            let d = pixel_to_direction(&intr, &pose, px).unwrap();
            let back = direction_to_pixel(&intr, &pose, &d);
            // edge pixels can land a hair outside after rounding
            if let Some((x, y)) = back {
                prop_assert!((x - px.0).abs() < 1e-6 && (y - px.1).abs() < 1e-6);
            } else {
                prop_assert!(px.0 < 1e-9 || px.0 > 640.0 - 1e-9 || px.1 < 1e-9 || px.1 > 480.0 - 1e-9);
            }
        }

        #[test]
        fn equirect_round_trip(x in -1.0..1.0f64, y in -0.999..0.999f64, z in -1.0..1.0f64) {
            prop_assume!(x * x + z * z > 1e-6);
            let d = UnitDirection::new(x, y, z).unwrap();
            let (u, v) = dir_to_equirect(&d);
            let e = equirect_to_dir(u, v).unwrap();
            prop_assert!((e.x() - d.x()).abs() < 1e-9);
            prop_assert!((e.y() - d.y()).abs() < 1e-9);
            prop_assert!((e.z() - d.z()).abs() < 1e-9);
        }

        #[test]
        fn rotations_preserve_norm(rot in arb_rotation(), x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
            prop_assume!(x * x + y * y + z * z > 1e-6);
            let d = UnitDirection::new(x, y, z).unwrap();
            prop_assert!((rot.rotate(d.as_vec()).norm() - 1.0).abs() < 1e-9);
            prop_assert!((rot.determinant() - 1.0).abs() < 1e-9);
            prop_assert!(rot.is_orthonormal(1e-9));
        }

        #[test]
        fn vertical_fov_is_monotone(a in 1.0..178.0f64, b in 1.0..178.0f64) {
            prop_assume!(a < b);
            let ia = intrinsics_from_fov(a, 400, 300).unwrap();
            let ib = intrinsics_from_fov(b, 400, 300).unwrap();
            prop_assert!(ia.v_fov_deg() < ib.v_fov_deg());
            // tan(v/2) = aspect · tan(h/2)
            let lhs = (ia.v_fov_deg() / 2.0).to_radians().tan();
            let rhs = 0.75 * (a / 2.0).to_radians().tan();
            prop_assert!((lhs - rhs).abs() < 1e-6 * rhs.max(1.0));
        }

        #[test]
        fn origin_projects_to_front_center(t in 0.0..=1.0f64, arm in 0.2..1.0f64, sweep in 1.0..=180.0f64) {
            let pose = great_circle_pose(t, arm, sweep).unwrap();
            let intr = intrinsics_from_fov(70.0, 640, 480).unwrap();
            let cam = pose.camera_pose(CameraId::Front);
            let to_origin = UnitDirection::from_vec(-pose.position).unwrap();
            let (x, y) = direction_to_pixel(&intr, &cam, &to_origin).unwrap();
            prop_assert!((x - 320.0).abs() < 1e-6 && (y - 240.0).abs() < 1e-6);
        }
    }
}
