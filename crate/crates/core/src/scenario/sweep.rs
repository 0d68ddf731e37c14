use serde::{Deserialize, Serialize};

use crate::capture::{procedural_scene, render_frame, Scene, Trajectory, TrajectoryKind};
use crate::envmap::{EnvironmentMap, MergeMode};
use crate::error::{Error, Result};
use crate::geometry::{CameraId, CameraIntrinsics, UnitDirection};
use crate::metrics::{psnr, render_probe, ProbeMaterial};

use super::ground_truth_envmap;

/// One camera combination: the front camera plus an optional back camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub label: String,
    pub back: Option<(CameraId, f64)>,
}

impl SweepSetup {
    /// Front only, front + wide (75°), front + ultrawide (120°).
    pub fn standard() -> Vec<Self> {
        vec![
            Self { label: "front".into(), back: None },
            Self { label: "front+back_wide".into(), back: Some((CameraId::BackWide, 75.0)) },
            Self { label: "front+back_ultrawide".into(), back: Some((CameraId::BackUltrawide, 120.0)) },
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub scene_height_px: u32,
    pub env_height_px: u32,
    pub frame_width_px: u32,
    pub frame_height_px: u32,
    pub front_h_fov_deg: f64,
    /// Poses sampled along a guided great-circle sweep.
    pub n_poses: u32,
    pub sweep_deg: f64,
    pub probe_res_px: u32,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            scene_height_px: 128,
            env_height_px: 64,
            frame_width_px: 128,
            frame_height_px: 96,
            front_h_fov_deg: 70.0,
            n_poses: 5,
            sweep_deg: 60.0,
            probe_res_px: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub label: String,
    pub psnr_db: Vec<f64>,
    pub mean_psnr_db: f64,
}

/// Mirror-probe PSNR of stitched maps against the ground-truth probe, per
/// setup and per seeded procedural scene.
pub fn probe_quality_sweep(seeds: &[u64], setups: &[SweepSetup], params: &SweepParams) -> Result<Vec<SweepResult>> {
    if seeds.is_empty() || params.n_poses == 0 {
        return Err(Error::invalid("sweep needs at least one seed and one pose"));
    }
    let front_intr = CameraIntrinsics::from_fov(params.front_h_fov_deg, params.frame_width_px, params.frame_height_px)?;
    let step_ms = 100u64;
    let traj = Trajectory {
        kind: TrajectoryKind::GreatCircle { arm_length_m: 0.4, sweep_deg: params.sweep_deg },
        duration_ms: step_ms * (params.n_poses.max(2) as u64 - 1),
        noise_sigma_deg: 0.0,
        seed: 0,
    };
    let view = UnitDirection::forward();
    let mut results: Vec<SweepResult> =
        setups.iter().map(|s| SweepResult { label: s.label.clone(), psnr_db: Vec::new(), mean_psnr_db: 0.0 }).collect();

    for &seed in seeds {
        let scene = Scene::static_scene(procedural_scene::<f64>(seed, params.scene_height_px))?;
        let truth = ground_truth_envmap(scene.truth(), 1.0, params.env_height_px)?;
        let gt_probe = render_probe(&truth, ProbeMaterial::Mirror, params.probe_res_px, &view)?;
        for (setup, out) in setups.iter().zip(results.iter_mut()) {
            let back_intr = match setup.back {
                Some((_, fov)) => Some(CameraIntrinsics::from_fov(fov, params.frame_width_px, params.frame_height_px)?),
                None => None,
            };
            let mut env = EnvironmentMap::new(params.env_height_px)?;
            for i in 0..params.n_poses as u64 {
                let t = i * step_ms;
                let device = traj.nominal_pose(t)?;
                let front = render_frame(&scene, &front_intr, &device.camera_pose(CameraId::Front), 1.0, t, CameraId::Front);
                env.merge_frame(&front, MergeMode::CurrentOnly);
                if let (Some((id, _)), Some(intr)) = (setup.back, back_intr.as_ref()) {
                    let back = render_frame(&scene, intr, &device.camera_pose(id), 1.0, t, id);
                    env.merge_frame(&back, MergeMode::NewestWins);
                }
            }
            let probe = render_probe(&env, ProbeMaterial::Mirror, params.probe_res_px, &view)?;
            out.psnr_db.push(psnr(&gt_probe, &probe, 1.0)?);
        }
    }
    for r in &mut results {
        r.mean_psnr_db = r.psnr_db.iter().sum::<f64>() / r.psnr_db.len() as f64;
    }
    Ok(results)
}
