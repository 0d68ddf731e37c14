//! Synthetic world: ground-truth HDR scenes, device trajectories, frame
//! rendering and IMU signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::envmap::Frame;
use crate::error::{Error, Result};
use crate::geometry::{
    equirect_to_dir_unchecked, great_circle_pose, pixel_to_direction, CameraId, CameraIntrinsics,
    DevicePose, Rotation, UnitDirection,
};
use crate::image::{gamma_encode, Image, Rgb};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum SceneChange<T> {
    /// Replace the whole radiance map.
    Replace(Image<T>),
    /// Multiply radiance inside a cone around `center` by `scale`.
    ScaleRegion { center: UnitDirection<T>, half_angle_deg: T, scale: T },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChangeEvent<T> {
    pub time_ms: u64,
    pub change: SceneChange<T>,
}

/// Ground-truth radiance plus timed step changes.
#[derive(Clone, Debug)]
pub struct Scene<T> {
    events: Vec<ChangeEvent<T>>,
    // states[0] is the initial map; states[k] is in effect from events[k-1].time_ms.
    states: Vec<Image<T>>,
}

impl<T: Real> Scene<T> {
    pub fn new(truth: Image<T>, events: Vec<ChangeEvent<T>>) -> Result<Self> {
        check_radiance_map(&truth)?;
        for pair in events.windows(2) {
            if pair[1].time_ms <= pair[0].time_ms {
                return Err(Error::invalid(format!(
                    "change events must be strictly increasing in time ({} ms then {} ms)",
                    pair[0].time_ms, pair[1].time_ms
                )));
            }
        }
        let mut states = vec![truth];
        for event in &events {
            let prev = states.last().unwrap();
            let next = match &event.change {
                SceneChange::Replace(img) => {
                    check_radiance_map(img)?;
                    img.clone()
                }
                SceneChange::ScaleRegion { center, half_angle_deg, scale } => {
                    if !(*scale >= T::zero()) || !scale.is_finite() {
                        return Err(Error::invalid(format!("region scale {scale} must be non-negative")));
                    }
                    scale_region(prev, center, *half_angle_deg, *scale)
                }
            };
            states.push(next);
        }
        Ok(Self { events, states })
    }

    pub fn static_scene(truth: Image<T>) -> Result<Self> {
        Self::new(truth, Vec::new())
    }

    pub fn truth(&self) -> &Image<T> {
        &self.states[0]
    }

    pub fn events(&self) -> &[ChangeEvent<T>] {
        &self.events
    }

    /// Radiance map in effect at `t_ms`: the last event at or before `t_ms` applies.
    pub fn active_truth(&self, t_ms: u64) -> &Image<T> {
        let applied = self.events.partition_point(|e| e.time_ms <= t_ms);
        &self.states[applied]
    }
}

/// Free-function form of [`Scene::active_truth`].
pub fn apply_change_events<T: Real>(scene: &Scene<T>, t_ms: u64) -> &Image<T> {
    scene.active_truth(t_ms)
}

fn check_radiance_map<T: Real>(img: &Image<T>) -> Result<()> {
    if img.height() == 0 || img.width() != 2 * img.height() {
        return Err(Error::DimensionMismatch(format!(
            "radiance map must be 2:1, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    if img.pixels().iter().flatten().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
        return Err(Error::invalid("radiance must be finite and non-negative"));
    }
    Ok(())
}

fn scale_region<T: Real>(img: &Image<T>, center: &UnitDirection<T>, half_angle_deg: T, scale: T) -> Image<T> {
    let cos_limit = half_angle_deg.to_radians().cos();
    let (w, h) = (T::from(img.width()).unwrap(), T::from(img.height()).unwrap());
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let u = (T::from(x).unwrap() + T::lit(0.5)) / w;
            let v = (T::from(y).unwrap() + T::lit(0.5)) / h;
            if equirect_to_dir_unchecked(u, v).dot(center) >= cos_limit {
                let c = img.get(x, y);
                out.set(x, y, c.map(|c| c * scale));
            }
        }
    }
    out
}

/// Deterministic indoor-like HDR panorama: a sky/floor gradient, band-limited
/// texture, coloured panels, and a few bright emitters.
pub fn procedural_scene<T: Real>(seed: u64, height_px: u32) -> Image<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sphere = |rng: &mut ChaCha8Rng| {
        let p: [f64; 3] = UnitSphere.sample(rng);
        p
    };

    let zenith = [rng.random_range(0.3..0.6), rng.random_range(0.35..0.65), rng.random_range(0.4..0.8)];
    let horizon = [rng.random_range(0.2..0.5), rng.random_range(0.2..0.5), rng.random_range(0.2..0.5)];
    let floor = [rng.random_range(0.05..0.25), rng.random_range(0.05..0.25), rng.random_range(0.05..0.25)];

    struct Wave {
        axis: [f64; 3],
        freq: f64,
        phase: f64,
        amp: [f64; 3],
    }
    let waves: Vec<Wave> = (0..8)
        .map(|_| Wave {
            axis: sphere(&mut rng),
            freq: rng.random_range(4.0..22.0),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            amp: [rng.random_range(0.02..0.08), rng.random_range(0.02..0.08), rng.random_range(0.02..0.08)],
        })
        .collect();

    struct Panel {
        u0: f64,
        v0: f64,
        du: f64,
        dv: f64,
        color: [f64; 3],
    }
    let panels: Vec<Panel> = (0..10)
        .map(|_| Panel {
            u0: rng.random_range(0.0..1.0),
            v0: rng.random_range(0.2..0.8),
            du: rng.random_range(0.03..0.15),
            dv: rng.random_range(0.05..0.2),
            color: [rng.random_range(0.05..0.9), rng.random_range(0.05..0.9), rng.random_range(0.05..0.9)],
        })
        .collect();

    struct Emitter {
        dir: [f64; 3],
        cos_radius: f64,
        radiance: [f64; 3],
    }
    let n_emitters = rng.random_range(2..=3);
    let emitters: Vec<Emitter> = (0..n_emitters)
        .map(|_| {
            let mut d = sphere(&mut rng);
            d[1] = d[1].abs() * 0.8 + 0.2;
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let tint: f64 = rng.random_range(0.8..1.0);
            Emitter {
                dir: [d[0] / n, d[1] / n, d[2] / n],
                cos_radius: rng.random_range(5.0f64..12.0).to_radians().cos(),
                radiance: [rng.random_range(3.0..8.0) * tint, rng.random_range(3.0..8.0), rng.random_range(3.0..8.0) * tint],
            }
        })
        .collect();

    let width = 2 * height_px;
    Image::from_fn(width, height_px, |x, y| {
        let u = (x as f64 + 0.5) / width as f64;
        let v = (y as f64 + 0.5) / height_px as f64;
        let d = equirect_to_dir_unchecked(u, v);
        let d = [d.x(), d.y(), d.z()];

        let mut c = if d[1] >= 0.0 {
            let t = d[1];
            [0, 1, 2].map(|k| horizon[k] + (zenith[k] - horizon[k]) * t)
        } else {
            let checker = (((u * 24.0).floor() + (v * 12.0).floor()) as i64).rem_euclid(2) as f64;
            [0, 1, 2].map(|k| floor[k] * (0.7 + 0.6 * checker))
        };
        for p in &panels {
            let du = (u - p.u0).rem_euclid(1.0);
            if du < p.du && v >= p.v0 && v < p.v0 + p.dv {
                c = p.color;
            }
        }
        for wv in &waves {
            let s = (wv.freq * (d[0] * wv.axis[0] + d[1] * wv.axis[1] + d[2] * wv.axis[2]) + wv.phase).sin();
            for k in 0..3 {
                c[k] += wv.amp[k] * s;
            }
        }
        for e in &emitters {
            if d[0] * e.dir[0] + d[1] * e.dir[1] + d[2] * e.dir[2] >= e.cos_radius {
                c = e.radiance;
            }
        }
        c.map(|v| T::lit(v.max(0.0)))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryKind<T> {
    Static,
    /// Guided sweep along a horizontal arc over the whole duration.
    GreatCircle { arm_length_m: T, sweep_deg: T },
    /// Piecewise-constant orientation with a random rotation of `step_deg`
    /// every `step_interval_ms`.
    RandomWalk { step_deg: T, step_interval_ms: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub kind: TrajectoryKind<T>,
    pub duration_ms: u64,
    /// Standard deviation of the pose-tracking error, degrees.
    pub noise_sigma_deg: T,
    pub seed: u64,
}

impl<T: Real> Trajectory<T> {
    pub fn stationary(duration_ms: u64) -> Self {
        Self { kind: TrajectoryKind::Static, duration_ms, noise_sigma_deg: T::zero(), seed: 0 }
    }

    /// Physical device pose without tracking noise.
    pub fn nominal_pose(&self, t_ms: u64) -> Result<DevicePose<T>> {
        match &self.kind {
            TrajectoryKind::Static => Ok(DevicePose::identity()),
            TrajectoryKind::GreatCircle { arm_length_m, sweep_deg } => {
                let t = if self.duration_ms == 0 {
                    T::lit(0.5)
                } else {
                    (T::from(t_ms).unwrap() / T::from(self.duration_ms).unwrap()).min(T::one())
                };
                great_circle_pose(t, *arm_length_m, *sweep_deg)
            }
            TrajectoryKind::RandomWalk { step_deg, step_interval_ms } => {
                if *step_interval_ms == 0 {
                    return Err(Error::invalid("random walk step interval must be positive"));
                }
                let steps = t_ms / step_interval_ms;
                let mut rotation = Rotation::identity();
                for k in 1..=steps {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed ^ 0x005e_ed0f_3a1c, k));
                    let axis: [f64; 3] = UnitSphere.sample(&mut rng);
                    let axis = UnitDirection::new(T::lit(axis[0]), T::lit(axis[1]), T::lit(axis[2]))?;
                    rotation = rotation.compose(&Rotation::from_axis_angle(&axis, step_deg.to_radians()));
                }
                Ok(DevicePose::from_rotation(rotation))
            }
        }
    }
}

/// SplitMix64 finalizer over a combined key.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random rotation with axis uniform on the sphere and angle `|N(0, σ)|`,
/// seeded by `(seed, t_ms)`.
pub fn tracking_noise<T: Real>(sigma_deg: T, seed: u64, t_ms: u64) -> Rotation<T> {
    if sigma_deg <= T::zero() {
        return Rotation::identity();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, t_ms));
    let axis: [f64; 3] = UnitSphere.sample(&mut rng);
    let normal = Normal::new(0.0, sigma_deg.as_f64()).expect("finite sigma");
    let angle: f64 = normal.sample(&mut rng);
    let axis = UnitDirection::new(T::lit(axis[0]), T::lit(axis[1]), T::lit(axis[2])).expect("unit axis");
    Rotation::from_axis_angle(&axis, T::lit(angle.abs().to_radians()))
}

/// Tracked device pose: the nominal pose composed with seeded tracking noise.
pub fn pose_at<T: Real>(traj: &Trajectory<T>, t_ms: u64, seed: u64) -> Result<DevicePose<T>> {
    let nominal = traj.nominal_pose(t_ms)?;
    let noise = tracking_noise(traj.noise_sigma_deg, seed, t_ms);
    Ok(DevicePose { rotation: nominal.rotation.compose(&noise), position: nominal.position })
}

/// Gyroscope magnitude in deg/s: angular distance between the physical
/// orientations at `t − window` and `t`, divided by the window.
pub fn imu_signal<T: Real>(traj: &Trajectory<T>, t_ms: u64, window_ms: u64) -> Result<T> {
    if window_ms == 0 {
        return Err(Error::invalid("IMU window must be positive"));
    }
    let a = traj.nominal_pose(t_ms.saturating_sub(window_ms))?;
    let b = traj.nominal_pose(t_ms)?;
    Ok(a.rotation.angle_to(&b.rotation).to_degrees() * T::lit(1000.0) / T::from(window_ms).unwrap())
}

/// Linear radiance seen by each pixel, scaled by exposure, before clamping.
pub fn render_radiance<T: Real>(
    scene: &Scene<T>,
    intr: &CameraIntrinsics<T>,
    pose: &DevicePose<T>,
    exposure: T,
    t_ms: u64,
) -> Image<T> {
    let truth = scene.active_truth(t_ms);
    let half = T::lit(0.5);
    Image::from_fn(intr.width_px(), intr.height_px(), |x, y| {
        let px = (T::from(x).unwrap() + half, T::from(y).unwrap() + half);
        let d = pixel_to_direction(intr, pose, px).expect("pixel centers are inside the image");
        truth.sample_direction(&d).map(|c| c * exposure)
    })
}

/// Renders an LDR camera frame: radiance × exposure, clamped to `[0, 1]`,
/// then display-encoded with γ = 2.2. `pose` is the camera pose.
pub fn render_frame<T: Real>(
    scene: &Scene<T>,
    intr: &CameraIntrinsics<T>,
    pose: &DevicePose<T>,
    exposure: T,
    t_ms: u64,
    camera_id: CameraId,
) -> Frame<T> {
    let image = render_radiance(scene, intr, pose, exposure, t_ms).map(to_ldr);
    Frame { image, intrinsics: *intr, pose: *pose, camera_id, timestamp_ms: t_ms }
}

/// Clamp to `[0, 1]` and display-encode.
pub fn to_ldr<T: Real>(c: Rgb<T>) -> Rgb<T> {
    c.map(|v| gamma_encode(v.max(T::zero()).min(T::one())))
}
