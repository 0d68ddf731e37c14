//! End-to-end simulation: a seeded timeline of front frames, policy-gated
//! back frames, map merging, lighting estimation and battery accounting.

mod config;
mod sweep;

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{
    BackMode, CameraConfig, CamerasConfig, EventConfig, LightingConfig, OutputPaths, ReportConfig, ScenarioConfig,
    SceneConfig, TrajectoryConfig, TrajectoryKindConfig, DEFAULT_TAIL_PCT,
};
pub use sweep::{probe_quality_sweep, SweepParams, SweepResult, SweepSetup};

use crate::capture::{imu_signal, pose_at, render_frame, to_ldr};
use crate::envmap::{EnvironmentMap, Frame, MergeMode};
use crate::error::{Error, Result};
use crate::geometry::{CameraId, UnitDirection};
use crate::image::Image;
use crate::lighting::{complete_envmap_with_band, estimate_lights_with, LightEstimate};
use crate::metrics::{coverage_of_envmap, render_probe, CoverageReport, ProbeMaterial, QualityReport};
use crate::policy::{
    charge, policy_step, write_action_csv, Action, ActionEvent, ActionRecord, EnergyLedger, EnergyModel, PolicyState,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupQuality {
    pub setup: String,
    /// Mirror probe of the stitched map against the ground-truth probe.
    pub stitched: QualityReport,
    /// Same, after completing unobserved texels from the light estimate.
    pub completed: QualityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub model: EnergyModel,
    pub ledger: EnergyLedger,
    pub duration_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub back_on_events: usize,
    pub back_off_events: usize,
    pub motion_triggers: usize,
    pub w_updates: usize,
    pub halvings: usize,
    pub increases: usize,
    pub final_w_ms: u64,
    pub front_frames: usize,
    pub back_frames: usize,
    pub back_on_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub config: ScenarioConfig,
    pub coverage: CoverageReport,
    pub quality: Vec<SetupQuality>,
    pub light: Option<LightEstimate<f64>>,
    pub energy: EnergySummary,
    pub policy: PolicySummary,
    pub wall_clock_ms: u64,
}

/// In-memory result of [`run_scenario`].
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub env: EnvironmentMap<f64>,
    pub completed: EnvironmentMap<f64>,
    pub truth_env: EnvironmentMap<f64>,
    pub light: Option<LightEstimate<f64>>,
    pub actions: Vec<ActionRecord>,
    pub report: RunReport,
}

/// Timestamp of tick `k` at `fps`, in whole milliseconds.
pub fn tick_time_ms(k: u64, fps: u32) -> u64 {
    k * 1000 / fps as u64
}

/// Display-encoded LDR map of `truth` resampled at `height_px`, fully observed.
pub fn ground_truth_envmap(truth: &Image<f64>, exposure: f64, height_px: u32) -> Result<EnvironmentMap<f64>> {
    let grid = EnvironmentMap::<f64>::new(height_px)?;
    let img = Image::from_fn(grid.width(), grid.height(), |x, y| {
        to_ldr(truth.sample_direction(&grid.texel_direction(x, y)).map(|v| v * exposure))
    });
    EnvironmentMap::from_image(img, 0)
}

fn setup_label(cfg: &ScenarioConfig) -> String {
    match cfg.back_mode {
        BackMode::Never => "front".into(),
        _ => format!("front+{}", cfg.cameras.back_id),
    }
}

/// Runs the timeline. `base_dir` resolves relative scene paths.
pub fn run_scenario(cfg: &ScenarioConfig, base_dir: &Path) -> Result<ScenarioRun> {
    cfg.validate()?;
    let started = Instant::now();
    let scene = cfg.build_scene(base_dir)?;
    let traj = cfg.trajectory();
    let front_intr = cfg.cameras.front.intrinsics()?;
    let back_intr = cfg.cameras.back.intrinsics()?;
    let back_id = cfg.cameras.back_id;
    let params = &cfg.policy;

    let mut env = EnvironmentMap::<f64>::new(cfg.env_height_px)?;
    let mut policy = PolicyState::<f64>::new(params)?;
    let mut ledger = EnergyLedger::default();
    let mut actions = Vec::new();
    let mut summary = PolicySummary::default();
    let mut pending_back: Option<Frame<f64>> = None;
    let mut light: Option<LightEstimate<f64>> = None;
    let mut next_estimate_ms = cfg.lighting.estimate_interval_ms;
    let estimate_params = cfg.lighting.estimate_params();
    let mut back_was_on = false;

    let mut k = 0u64;
    loop {
        let t = tick_time_ms(k, cfg.fps);
        if t >= cfg.duration_ms {
            break;
        }
        let device = pose_at(&traj, t, cfg.seed)?;
        let imu = imu_signal(&traj, t, cfg.imu_window_ms)?;

        let back_on = match cfg.back_mode {
            BackMode::Policy => {
                let step = policy_step(&mut policy, params, t, imu, pending_back.as_ref())?;
                for a in &step {
                    let (event, ssim) = match a {
                        Action::BackOn { .. } => {
                            summary.back_on_events += 1;
                            (ActionEvent::BackOn, None)
                        }
                        Action::BackOff => {
                            summary.back_off_events += 1;
                            (ActionEvent::BackOff, None)
                        }
                        Action::MotionTrigger => {
                            summary.motion_triggers += 1;
                            (ActionEvent::MotionTrigger, None)
                        }
                        Action::WUpdate { from_ms, to_ms, ssim } => {
                            summary.w_updates += 1;
                            if to_ms < from_ms {
                                summary.halvings += 1;
                            } else if to_ms > from_ms {
                                summary.increases += 1;
                            }
                            (ActionEvent::WUpdate, *ssim)
                        }
                    };
                    actions.push(ActionRecord { time_ms: t, event, w_ms: policy.w_ms, ssim, battery_pct: ledger.battery_pct });
                }
                policy.back_on
            }
            BackMode::Always => {
                if k == 0 {
                    summary.back_on_events += 1;
                    actions.push(ActionRecord {
                        time_ms: t,
                        event: ActionEvent::BackOn,
                        w_ms: policy.w_ms,
                        ssim: None,
                        battery_pct: ledger.battery_pct,
                    });
                }
                true
            }
            BackMode::Never => false,
        };

        let front = render_frame(&scene, &front_intr, &device.camera_pose(CameraId::Front), cfg.exposure_scale, t, CameraId::Front);
        env.merge_frame(&front, MergeMode::for_camera(CameraId::Front));
        summary.front_frames += 1;

        pending_back = if back_on {
            let back = render_frame(&scene, &back_intr, &device.camera_pose(back_id), cfg.exposure_scale, t, back_id);
            env.merge_frame(&back, MergeMode::for_camera(back_id));
            summary.back_frames += 1;
            Some(back)
        } else {
            None
        };

        let next_t = tick_time_ms(k + 1, cfg.fps).min(cfg.duration_ms);
        ledger = charge(&ledger, &cfg.energy, next_t - t, true, back_on, back_on && !back_was_on);
        back_was_on = back_on;

        if t >= next_estimate_ms {
            if let Ok(est) = estimate_lights_with(&env, &estimate_params) {
                light = Some(est);
            }
            next_estimate_ms = t + cfg.lighting.estimate_interval_ms;
        }
        k += 1;
    }

    if let Ok(est) = estimate_lights_with(&env, &estimate_params) {
        light = Some(est);
    }
    let completed = match &light {
        Some(est) => complete_envmap_with_band(&env, est, cfg.lighting.blend_band_deg),
        None => env.clone(),
    };

    let end_t = cfg.duration_ms.saturating_sub(1);
    let truth_env = ground_truth_envmap(scene.active_truth(end_t), cfg.exposure_scale, cfg.env_height_px)?;
    let view = UnitDirection::forward();
    let res = cfg.report.probe_res_px;
    let gt_probe = render_probe(&truth_env, ProbeMaterial::Mirror, res, &view)?;
    let stitched = QualityReport::compare(&gt_probe, &render_probe(&env, ProbeMaterial::Mirror, res, &view)?)?;
    let completed_q = QualityReport::compare(&gt_probe, &render_probe(&completed, ProbeMaterial::Mirror, res, &view)?)?;

    summary.final_w_ms = policy.w_ms;
    summary.back_on_fraction =
        if cfg.duration_ms == 0 { 0.0 } else { ledger.back_on_ms as f64 / cfg.duration_ms as f64 };

    let report = RunReport {
        scenario_id: cfg.scenario_id.clone(),
        config: cfg.clone(),
        coverage: coverage_of_envmap(&env, cfg.report.coverage_samples),
        quality: vec![SetupQuality { setup: setup_label(cfg), stitched, completed: completed_q }],
        light,
        energy: EnergySummary { model: cfg.energy, ledger, duration_ms: cfg.duration_ms },
        policy: summary,
        wall_clock_ms: started.elapsed().as_millis() as u64,
    };
    Ok(ScenarioRun { env, completed, truth_env, light, actions, report })
}

/// Writes every artifact of a run into `out_dir`, creating it if needed.
pub fn write_artifacts(run: &ScenarioRun, outputs: &OutputPaths, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = |p: &Path| out_dir.join(p);
    crate::io::save_envmap(&run.env, path(&outputs.env_ppm), path(&outputs.mask_pgm))?;
    crate::io::write_ppm(path(&outputs.completed_ppm), run.completed.texels())?;
    write_json(&path(&outputs.light_json), &run.light)?;
    write_json(&path(&outputs.report_json), &run.report)?;
    let mut csv = Vec::new();
    write_action_csv(&mut csv, &run.actions)?;
    let p = path(&outputs.actions_csv);
    fs::write(&p, csv).map_err(|e| Error::io(p, e))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format { format: "json", message: e.to_string() })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(duration_ms: u64) -> ScenarioConfig {
        ScenarioConfig {
            duration_ms,
            env_height_px: 32,
            scene: SceneConfig { height_px: 64, ..Default::default() },
            cameras: CamerasConfig {
                front: CameraConfig { width_px: 48, height_px: 36, ..Default::default() },
                back: CameraConfig { h_fov_deg: 75.0, width_px: 48, height_px: 36 },
                ..Default::default()
            },
            report: ReportConfig { coverage_samples: 20_000, probe_res_px: 32 },
            ..Default::default()
        }
    }

    #[test]
    fn zero_duration_is_empty() {
        let run = run_scenario(&small(0), Path::new(".")).unwrap();
        assert_eq!(run.env.observed_count(), 0);
        assert_eq!(run.report.energy.ledger, EnergyLedger::default());
        assert!(run.actions.is_empty());
        assert!(run.light.is_none());
    }

    #[test]
    fn tick_times() {
        assert_eq!((0..4).map(|k| tick_time_ms(k, 30)).collect::<Vec<_>>(), vec![0, 33, 66, 100]);
    }

    #[test]
    fn static_run_is_deterministic_and_consistent() {
        let cfg = small(3000);
        let a = run_scenario(&cfg, Path::new(".")).unwrap();
        let b = run_scenario(&cfg, Path::new(".")).unwrap();
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.env.texels(), b.env.texels());
        assert_eq!(a.report.coverage, b.report.coverage);
        let p = &a.report.policy;
        assert_eq!(p.front_frames, 90);
        assert!(p.back_frames > 0 && p.back_frames < 90);
        assert_eq!(a.report.energy.ledger.front_on_ms, 3000);
        // front70 + back75 on a static device: about 2.14× one front frustum.
        assert!(a.report.coverage.fraction > 0.1 && a.report.coverage.fraction < 0.3, "{:?}", a.report.coverage);
    }

    #[test]
    fn back_modes() {
        let mut cfg = small(1000);
        cfg.back_mode = BackMode::Never;
        let never = run_scenario(&cfg, Path::new(".")).unwrap();
        assert_eq!(never.report.policy.back_frames, 0);
        assert_eq!(never.report.quality[0].setup, "front");
        cfg.back_mode = BackMode::Always;
        let always = run_scenario(&cfg, Path::new(".")).unwrap();
        assert_eq!(always.report.policy.back_frames, 30);
        assert_eq!(always.report.energy.ledger.back_activations, 1);
        assert!(always.report.energy.ledger.battery_pct > never.report.energy.ledger.battery_pct);
    }
}
