//! Dual-camera environment-map reconstruction, lighting estimation and
//! capture scheduling on a simulated phone.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`). The aliases at the
//! crate root fix the scalar: plain names use `f64`, the `…32` names `f32`.

pub mod capture;
pub mod envmap;
pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod lighting;
mod linalg;
pub mod metrics;
pub mod policy;
pub mod real;
pub mod scenario;
pub(crate) mod serde_inf;

pub use error::{Error, Result};
pub use real::Real;

pub type Vec3 = geometry::Vec3<f64>;
pub type UnitDirection = geometry::UnitDirection<f64>;
pub type Rotation = geometry::Rotation<f64>;
pub type CameraIntrinsics = geometry::CameraIntrinsics<f64>;
pub type DevicePose = geometry::DevicePose<f64>;
pub type Image = image::Image<f64>;
pub type Frame = envmap::Frame<f64>;
pub type EnvironmentMap = envmap::EnvironmentMap<f64>;
pub type Scene = capture::Scene<f64>;
pub type Trajectory = capture::Trajectory<f64>;
pub type LightEstimate = lighting::LightEstimate<f64>;
pub type ShCoeffs = lighting::ShCoeffs<f64>;
pub type PolicyState = policy::PolicyState<f64>;

pub type Vec3_32 = geometry::Vec3<f32>;
pub type UnitDirection32 = geometry::UnitDirection<f32>;
pub type Rotation32 = geometry::Rotation<f32>;
pub type CameraIntrinsics32 = geometry::CameraIntrinsics<f32>;
pub type DevicePose32 = geometry::DevicePose<f32>;
pub type Image32 = image::Image<f32>;
pub type Frame32 = envmap::Frame<f32>;
pub type EnvironmentMap32 = envmap::EnvironmentMap<f32>;
pub type Scene32 = capture::Scene<f32>;
pub type Trajectory32 = capture::Trajectory<f32>;
pub type LightEstimate32 = lighting::LightEstimate<f32>;
pub type ShCoeffs32 = lighting::ShCoeffs<f32>;
pub type PolicyState32 = policy::PolicyState<f32>;
