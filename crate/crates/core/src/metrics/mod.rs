//! Coverage, image quality and probe rendering.

mod coverage;
mod probe;
mod quality;

pub use coverage::{
    analytic_frustum_fraction, coverage, coverage_of_envmap, fibonacci_sphere, CoverageReport, Frustum,
    DEFAULT_SAMPLES,
};
pub use probe::{render_probe, ProbeMaterial, MIN_PROBE_RES};
pub use quality::{psnr, ssim, ssim_luma, QualityReport, SSIM_STRIDE, SSIM_WINDOW};
