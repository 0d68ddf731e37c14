use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::capture::{procedural_scene, ChangeEvent, Scene, SceneChange, Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::geometry::{CameraId, CameraIntrinsics, UnitDirection};
use crate::io::read_pfm;
use crate::lighting::{EstimateParams, DEFAULT_BLEND_BAND_DEG};
use crate::metrics::DEFAULT_SAMPLES;
use crate::policy::{EnergyModel, PolicyParams};

/// Tail cost per back-camera activation used when the config leaves it out.
pub const DEFAULT_TAIL_PCT: f64 = 0.02;

/// A simulation run. Every field has a default; keys carry their units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    /// Root of every random choice in the run.
    pub seed: u64,
    pub duration_ms: u64,
    pub fps: u32,
    pub exposure_scale: f64,
    pub env_height_px: u32,
    pub imu_window_ms: u64,
    pub scene: SceneConfig,
    pub trajectory: TrajectoryConfig,
    pub cameras: CamerasConfig,
    pub back_mode: BackMode,
    pub policy: PolicyParams,
    pub energy: EnergyModel,
    pub lighting: LightingConfig,
    pub report: ReportConfig,
    pub outputs: OutputPaths,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario_id: "scenario".into(),
            seed: 1,
            duration_ms: 10_000,
            fps: 30,
            exposure_scale: 1.0,
            env_height_px: 128,
            imu_window_ms: 33,
            scene: SceneConfig::default(),
            trajectory: TrajectoryConfig::default(),
            cameras: CamerasConfig::default(),
            back_mode: BackMode::Policy,
            policy: PolicyParams::default(),
            energy: EnergyModel { tail_pct_per_activation: DEFAULT_TAIL_PCT, ..EnergyModel::measured() },
            lighting: LightingConfig::default(),
            report: ReportConfig::default(),
            outputs: OutputPaths::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// HDR truth map; a procedural scene is generated when absent. Relative
    /// paths resolve against the config file's directory.
    pub truth_pfm: Option<PathBuf>,
    /// Seed of the procedural scene; defaults to the run seed.
    pub procedural_seed: Option<u64>,
    pub height_px: u32,
    pub events: Vec<EventConfig>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { truth_pfm: None, procedural_seed: None, height_px: 256, events: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventConfig {
    /// Replace the scene with another procedural scene.
    Swap { time_ms: u64, procedural_seed: u64 },
    /// Replace the scene with a PFM map.
    Replace { time_ms: u64, truth_pfm: PathBuf },
    ScaleRegion { time_ms: u64, center_dir: [f64; 3], half_angle_deg: f64, scale: f64 },
}

impl EventConfig {
    pub fn time_ms(&self) -> u64 {
        match self {
            Self::Swap { time_ms, .. } | Self::Replace { time_ms, .. } | Self::ScaleRegion { time_ms, .. } => *time_ms,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKindConfig {
    Static,
    GreatCircle,
    RandomWalk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub kind: TrajectoryKindConfig,
    pub arm_length_m: f64,
    pub sweep_deg: f64,
    pub step_deg: f64,
    pub step_interval_ms: u64,
    pub noise_sigma_deg: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            kind: TrajectoryKindConfig::Static,
            arm_length_m: 0.4,
            sweep_deg: 60.0,
            step_deg: 20.0,
            step_interval_ms: 2000,
            noise_sigma_deg: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub h_fov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics<f64>> {
        CameraIntrinsics::from_fov(self.h_fov_deg, self.width_px, self.height_px)
    }
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { h_fov_deg: 70.0, width_px: 160, height_px: 120 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CamerasConfig {
    pub front: CameraConfig,
    pub back_id: CameraId,
    pub back: CameraConfig,
}

impl Default for CamerasConfig {
    fn default() -> Self {
        Self {
            front: CameraConfig::default(),
            back_id: CameraId::BackWide,
            back: CameraConfig { h_fov_deg: CameraId::BackWide.default_h_fov_deg(), ..CameraConfig::default() },
        }
    }
}

/// How the back camera is scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackMode {
    Policy,
    Always,
    Never,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LightingConfig {
    pub estimate_interval_ms: u64,
    pub exponent: f64,
    pub top_fraction: f64,
    pub blend_band_deg: f64,
}

impl LightingConfig {
    pub fn estimate_params(&self) -> EstimateParams {
        EstimateParams { exponent: self.exponent, top_fraction: self.top_fraction }
    }
}

impl Default for LightingConfig {
    fn default() -> Self {
        let p = EstimateParams::default();
        Self { estimate_interval_ms: 1000, exponent: p.exponent, top_fraction: p.top_fraction, blend_band_deg: DEFAULT_BLEND_BAND_DEG }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub coverage_samples: usize,
    pub probe_res_px: u32,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { coverage_samples: DEFAULT_SAMPLES, probe_res_px: 64 }
    }
}

/// Artifact file names, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub env_ppm: PathBuf,
    pub mask_pgm: PathBuf,
    pub completed_ppm: PathBuf,
    pub light_json: PathBuf,
    pub report_json: PathBuf,
    pub actions_csv: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            env_ppm: "env.ppm".into(),
            mask_pgm: "mask.pgm".into(),
            completed_ppm: "completed.ppm".into(),
            light_json: "light.json".into(),
            report_json: "report.json".into(),
            actions_csv: "actions.csv".into(),
        }
    }
}

/// A config problem tied to the JSON key it concerns.
struct KeyError {
    key: &'static str,
    message: String,
}

fn key_err(key: &'static str, message: impl Into<String>) -> KeyError {
    KeyError { key, message: message.into() }
}

impl ScenarioConfig {
    /// Parses and validates JSON text. Errors carry the 1-based line of the
    /// offending key (line 1 when the key is not written out).
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Config { line: e.line().max(1), message: e.to_string() })?;
        cfg.check().map_err(|e| Error::Config { line: key_line(text, e.key), message: format!("{}: {}", e.key, e.message) })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| Error::Config { line: 1, message: format!("{}: {}", e.key, e.message) })
    }

    fn check(&self) -> std::result::Result<(), KeyError> {
        if self.fps == 0 {
            return Err(key_err("fps", "must be positive"));
        }
        if !(self.exposure_scale.is_finite() && self.exposure_scale > 0.0) {
            return Err(key_err("exposure_scale", "must be positive"));
        }
        if self.env_height_px < 2 {
            return Err(key_err("env_height_px", "must be at least 2"));
        }
        if self.imu_window_ms == 0 {
            return Err(key_err("imu_window_ms", "must be positive"));
        }
        if self.scene.height_px < 2 {
            return Err(key_err("height_px", "must be at least 2"));
        }
        let mut last = None;
        for e in &self.scene.events {
            if last.is_some_and(|l| e.time_ms() <= l) {
                return Err(key_err("events", "event times must be strictly increasing"));
            }
            last = Some(e.time_ms());
            if let EventConfig::ScaleRegion { center_dir, half_angle_deg, scale, .. } = e {
                if UnitDirection::new(center_dir[0], center_dir[1], center_dir[2]).is_err() {
                    return Err(key_err("center_dir", "must be a nonzero finite vector"));
                }
                if !(half_angle_deg.is_finite() && *half_angle_deg >= 0.0) {
                    return Err(key_err("half_angle_deg", "must be non-negative"));
                }
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(key_err("scale", "must be non-negative"));
                }
            }
        }
        let t = &self.trajectory;
        if !(t.noise_sigma_deg.is_finite() && t.noise_sigma_deg >= 0.0) {
            return Err(key_err("noise_sigma_deg", "must be non-negative"));
        }
        if !t.sweep_deg.is_finite() || !t.arm_length_m.is_finite() || !t.step_deg.is_finite() {
            return Err(key_err("trajectory", "parameters must be finite"));
        }
        if t.kind == TrajectoryKindConfig::RandomWalk && t.step_interval_ms == 0 {
            return Err(key_err("step_interval_ms", "must be positive"));
        }
        for (key, cam) in [("front", &self.cameras.front), ("back", &self.cameras.back)] {
            cam.intrinsics().map_err(|e| key_err(key, e.to_string()))?;
        }
        if self.cameras.back_id.is_front() {
            return Err(key_err("back_id", "must name a back camera"));
        }
        self.policy.validate().map_err(|e| key_err("policy", e.to_string()))?;
        self.energy.validate().map_err(|e| key_err("energy", e.to_string()))?;
        let l = &self.lighting;
        if l.estimate_interval_ms == 0 {
            return Err(key_err("estimate_interval_ms", "must be positive"));
        }
        if !(l.exponent.is_finite() && l.exponent >= 0.0) {
            return Err(key_err("exponent", "must be non-negative"));
        }
        if !(l.top_fraction > 0.0 && l.top_fraction <= 1.0) {
            return Err(key_err("top_fraction", "must lie in (0, 1]"));
        }
        if !(l.blend_band_deg.is_finite() && l.blend_band_deg >= 0.0) {
            return Err(key_err("blend_band_deg", "must be non-negative"));
        }
        if self.report.coverage_samples == 0 {
            return Err(key_err("coverage_samples", "must be positive"));
        }
        if self.report.probe_res_px < crate::metrics::MIN_PROBE_RES {
            return Err(key_err("probe_res_px", format!("must be at least {}", crate::metrics::MIN_PROBE_RES)));
        }
        Ok(())
    }

    pub fn trajectory(&self) -> Trajectory<f64> {
        let t = &self.trajectory;
        let kind = match t.kind {
            TrajectoryKindConfig::Static => TrajectoryKind::Static,
            TrajectoryKindConfig::GreatCircle => {
                TrajectoryKind::GreatCircle { arm_length_m: t.arm_length_m, sweep_deg: t.sweep_deg }
            }
            TrajectoryKindConfig::RandomWalk => {
                TrajectoryKind::RandomWalk { step_deg: t.step_deg, step_interval_ms: t.step_interval_ms }
            }
        };
        Trajectory { kind, duration_ms: self.duration_ms, noise_sigma_deg: t.noise_sigma_deg, seed: self.seed }
    }

    /// Builds the ground-truth scene; relative PFM paths resolve against `base`.
    pub fn build_scene(&self, base: &Path) -> Result<Scene<f64>> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let h = self.scene.height_px;
        let truth = match &self.scene.truth_pfm {
            Some(p) => read_pfm(resolve(p))?,
            None => procedural_scene(self.scene.procedural_seed.unwrap_or(self.seed), h),
        };
        let mut events = Vec::with_capacity(self.scene.events.len());
        for e in &self.scene.events {
            let change = match e {
                EventConfig::Swap { procedural_seed, .. } => SceneChange::Replace(procedural_scene(*procedural_seed, truth.height())),
                EventConfig::Replace { truth_pfm, .. } => SceneChange::Replace(read_pfm(resolve(truth_pfm))?),
                EventConfig::ScaleRegion { center_dir, half_angle_deg, scale, .. } => SceneChange::ScaleRegion {
                    center: UnitDirection::new(center_dir[0], center_dir[1], center_dir[2])?,
                    half_angle_deg: *half_angle_deg,
                    scale: *scale,
                },
            };
            events.push(ChangeEvent { time_ms: e.time_ms(), change });
        }
        Scene::new(truth, events)
    }
}

/// Line of the first occurrence of `"key"` in `text`, 1-based.
fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}
