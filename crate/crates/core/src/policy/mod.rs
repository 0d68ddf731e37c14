//! Back-camera scheduling: an AIMD timer plus a motion trigger.
//!
//! The back camera streams for `w` milliseconds, then stays off for `w`. At
//! the end of each window the last back frame is compared with the last frame
//! of the previous window (the window's own first frame when there is none).
//! A luma SSIM below `tau_ssim` halves `w`; otherwise `w` grows by
//! `delta_ms`. Large IMU rates followed by a settled period start a window
//! immediately.

mod energy;
mod log;

use serde::{Deserialize, Serialize};

pub use energy::{charge, fit_energy_model, EnergyFit, EnergyLedger, EnergyModel, EnergyRow, MEASURED_SESSIONS};
pub use log::{parse_action_csv, write_action_csv, ActionEvent, ActionRecord, ACTION_CSV_HEADER};

use crate::envmap::Frame;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{psnr, ssim, QualityReport};
use crate::real::Real;

/// Frame interval of the renderer; windows must be longer.
pub const RENDER_INTERVAL_MS: u64 = 33;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    pub w_init_ms: u64,
    pub w_min_ms: u64,
    pub w_max_ms: u64,
    pub delta_ms: u64,
    pub tau_ssim: f64,
    pub theta_move_dps: f64,
    pub theta_still_dps: f64,
    pub t_still_ms: u64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            w_init_ms: 1000,
            w_min_ms: 100,
            w_max_ms: 10_000,
            delta_ms: 500,
            tau_ssim: 0.90,
            theta_move_dps: 30.0,
            theta_still_dps: 5.0,
            t_still_ms: 300,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(self.w_min_ms <= self.w_init_ms && self.w_init_ms <= self.w_max_ms) {
            return bad(format!(
                "need w_min_ms <= w_init_ms <= w_max_ms, got {} / {} / {}",
                self.w_min_ms, self.w_init_ms, self.w_max_ms
            ));
        }
        if self.w_init_ms <= RENDER_INTERVAL_MS {
            return bad(format!("w_init_ms must exceed {RENDER_INTERVAL_MS}, got {}", self.w_init_ms));
        }
        if self.w_min_ms == 0 {
            return bad("w_min_ms must be positive".into());
        }
        if self.delta_ms == 0 {
            return bad("delta_ms must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.tau_ssim) {
            return bad(format!("tau_ssim must lie in [0, 1], got {}", self.tau_ssim));
        }
        if !(self.theta_still_dps >= 0.0 && self.theta_still_dps < self.theta_move_dps) {
            return bad(format!(
                "need 0 <= theta_still_dps < theta_move_dps, got {} / {}",
                self.theta_still_dps, self.theta_move_dps
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionPhase {
    Idle,
    Moving,
    Settling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Timer,
    Motion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    BackOn { trigger: Trigger },
    BackOff,
    /// Emitted on the step where the device is judged settled after moving.
    MotionTrigger,
    /// Window closed; `ssim` is `None` when the window held no frame.
    WUpdate { from_ms: u64, to_ms: u64, ssim: Option<f64> },
}

#[derive(Clone, Debug)]
pub struct PolicyState<T> {
    pub w_ms: u64,
    pub back_on: bool,
    pub next_fire_ms: u64,
    pub stream_start_ms: u64,
    pub stream_until_ms: u64,
    pub motion_phase: MotionPhase,
    pub settle_since_ms: u64,
    last_now_ms: Option<u64>,
    window_first: Option<Image<T>>,
    window_last: Option<Image<T>>,
    previous_last: Option<Image<T>>,
}

impl<T: Real> PolicyState<T> {
    pub fn new(params: &PolicyParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            w_ms: params.w_init_ms,
            back_on: false,
            next_fire_ms: 0,
            stream_start_ms: 0,
            stream_until_ms: 0,
            motion_phase: MotionPhase::Idle,
            settle_since_ms: 0,
            last_now_ms: None,
            window_first: None,
            window_last: None,
            previous_last: None,
        })
    }

    /// Most recent back frame of the current window.
    pub fn last_back_frame(&self) -> Option<&Image<T>> {
        self.window_last.as_ref()
    }

    fn start_window(&mut self, now_ms: u64) {
        self.back_on = true;
        self.stream_start_ms = now_ms;
        self.stream_until_ms = now_ms + self.w_ms;
        self.window_first = None;
        self.window_last = None;
    }
}

/// Advances the controller to `now_ms`.
///
/// `latest_back_frame` is the back frame captured since the previous step, if
/// any; it belongs to the window that was open when it was captured. Within a
/// step the order is: ingest frame, close an expired window, motion
/// handling, timer.
pub fn policy_step<T: Real>(
    state: &mut PolicyState<T>,
    params: &PolicyParams,
    now_ms: u64,
    imu_dps: f64,
    latest_back_frame: Option<&Frame<T>>,
) -> Result<Vec<Action>> {
    if let Some(last) = state.last_now_ms {
        if now_ms < last {
            return Err(Error::TimeRegression { now_ms, last_ms: last });
        }
    }
    state.last_now_ms = Some(now_ms);
    let mut actions = Vec::new();

    if let Some(frame) = latest_back_frame {
        if state.back_on {
            if state.window_first.is_none() {
                state.window_first = Some(frame.image.clone());
            }
            state.window_last = Some(frame.image.clone());
        }
    }

    if state.back_on && now_ms >= state.stream_until_ms {
        actions.push(Action::BackOff);
        state.back_on = false;
        let score = match (&state.window_last, state.previous_last.as_ref().or(state.window_first.as_ref())) {
            (Some(last), Some(reference)) => Some(ssim(reference, last)?.as_f64()),
            _ => None,
        };
        let from = state.w_ms;
        if let Some(s) = score {
            state.w_ms = if s < params.tau_ssim {
                (state.w_ms / 2).max(params.w_min_ms)
            } else {
                (state.w_ms + params.delta_ms).min(params.w_max_ms)
            };
        }
        actions.push(Action::WUpdate { from_ms: from, to_ms: state.w_ms, ssim: score });
        if let Some(last) = state.window_last.take() {
            state.previous_last = Some(last);
        }
        state.window_first = None;
        state.next_fire_ms = now_ms + state.w_ms;
    }

    if imu_dps > params.theta_move_dps {
        state.motion_phase = MotionPhase::Moving;
    } else if imu_dps < params.theta_still_dps {
        match state.motion_phase {
            MotionPhase::Moving => {
                state.motion_phase = MotionPhase::Settling;
                state.settle_since_ms = now_ms;
            }
            MotionPhase::Settling if now_ms - state.settle_since_ms >= params.t_still_ms => {
                state.motion_phase = MotionPhase::Idle;
                actions.push(Action::MotionTrigger);
                if state.back_on {
                    state.stream_until_ms = now_ms + state.w_ms;
                } else {
                    state.start_window(now_ms);
                    actions.push(Action::BackOn { trigger: Trigger::Motion });
                }
                state.next_fire_ms = state.stream_until_ms + state.w_ms;
            }
            _ => {}
        }
    } else if state.motion_phase == MotionPhase::Settling {
        state.motion_phase = MotionPhase::Moving;
    }

    if !state.back_on && now_ms >= state.next_fire_ms {
        state.start_window(now_ms);
        actions.push(Action::BackOn { trigger: Trigger::Timer });
    }
    Ok(actions)
}

/// Luma SSIM and RGB PSNR between two frames of equal size.
pub fn change_score<T: Real>(a: &Frame<T>, b: &Frame<T>) -> Result<QualityReport> {
    Ok(QualityReport { psnr_db: psnr(&a.image, &b.image, T::one())?.as_f64(), ssim: ssim(&a.image, &b.image)?.as_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraId, CameraIntrinsics, DevicePose};
    use proptest::prelude::*;

    fn frame(img: Image<f64>, ts: u64) -> Frame<f64> {
        let intr = CameraIntrinsics::from_fov(75.0, img.width(), img.height()).unwrap();
        Frame::new(img, intr, DevicePose::identity(), CameraId::BackWide, ts).unwrap()
    }

    fn pattern(k: u32) -> Image<f64> {
        // Distinct, mutually dissimilar textures per k.
        Image::from_fn(32, 24, |x, y| {
            let v = ((x * (k + 3) + y * (2 * k + 1) + k * 7) % 5) as f64 / 4.0;
            [v, v, v]
        })
    }

    /// Steps every `dt` ms from 0 to `end`, feeding `content(window_index)` as
    /// the back frame while the camera is on.
    fn run(
        params: &PolicyParams,
        end: u64,
        dt: u64,
        imu: impl Fn(u64) -> f64,
        content: impl Fn(u64) -> Image<f64>,
    ) -> Vec<(u64, Action)> {
        let mut st = PolicyState::<f64>::new(params).unwrap();
        let mut log = Vec::new();
        let mut pending: Option<Frame<f64>> = None;
        let mut t = 0;
        while t <= end {
            let acts = policy_step(&mut st, params, t, imu(t), pending.as_ref()).unwrap();
            assert!(st.w_ms >= params.w_min_ms && st.w_ms <= params.w_max_ms);
            log.extend(acts.into_iter().map(|a| (t, a)));
            pending = st.back_on.then(|| frame(content(t), t));
            t += dt;
        }
        log
    }

    #[test]
    fn halves_on_change() {
        let params = PolicyParams { w_init_ms: 200, ..Default::default() };
        // Window [0, 200) sees pattern 0 and grows w to 700; the next window
        // [900, 1600) sees pattern 1.
        let log = run(&params, 1700, 10, |_| 0.0, |t| pattern(if t < 300 { 0 } else { 1 }));
        let updates: Vec<_> = log.iter().filter_map(|(_, a)| match a {
            Action::WUpdate { from_ms, to_ms, .. } => Some((*from_ms, *to_ms)),
            _ => None,
        }).collect();
        assert_eq!(updates[0], (200, 700));
        assert_eq!(updates[1], (700, 350));
    }

    #[test]
    fn clamps_at_w_min() {
        let params = PolicyParams { w_init_ms: 100, w_min_ms: 100, ..Default::default() };
        let log = run(&params, 1000, 10, |_| 0.0, |t| pattern((t / 100) as u32 % 4));
        for (_, a) in &log {
            if let Action::WUpdate { from_ms, to_ms, ssim } = a {
                if ssim.is_some_and(|s| s < params.tau_ssim) {
                    assert_eq!((*from_ms, *to_ms), (100, 100));
                }
            }
        }
    }

    #[test]
    fn static_schedule_closed_form() {
        let params = PolicyParams::default();
        let log = run(&params, 10_000, 10, |_| 0.0, |_| pattern(0));
        let ons: Vec<u64> = log.iter().filter(|(_, a)| matches!(a, Action::BackOn { .. })).map(|(t, _)| *t).collect();
        let offs: Vec<u64> = log.iter().filter(|(_, a)| matches!(a, Action::BackOff)).map(|(t, _)| *t).collect();
        // w: 1000, 1500, 2000, 2500; on at 0, off at w, next on after another w.
        let mut expected_on = vec![];
        let mut expected_off = vec![];
        let (mut t, mut w) = (0, 1000);
        while t <= 10_000 {
            expected_on.push(t);
            if t + w <= 10_000 {
                expected_off.push(t + w);
            }
            let next_w = (w + 500).min(10_000);
            t += w + next_w;
            w = next_w;
        }
        assert_eq!(ons, expected_on);
        assert_eq!(offs, expected_off);
        let on_time: u64 = expected_off.iter().zip(&expected_on).map(|(off, on)| off - on).sum();
        assert_eq!(on_time, 1000 + 1500 + 2000);
    }

    #[test]
    fn motion_trigger_after_settle() {
        let params = PolicyParams { w_init_ms: 2000, ..Default::default() };
        // Window [0, 2000) then off until 4000. Move at 2500..2800, settle afterwards.
        let imu = |t: u64| if (2500..2800).contains(&t) { 60.0 } else { 0.0 };
        let log = run(&params, 3500, 10, imu, |_| pattern(0));
        let trig: Vec<_> = log.iter().filter(|(_, a)| matches!(a, Action::MotionTrigger)).collect();
        assert_eq!(trig.len(), 1);
        // Settling starts at 2800; trigger once 300 ms of stillness elapsed.
        assert_eq!(trig[0].0, 3100);
        assert!(log.contains(&(3100, Action::BackOn { trigger: Trigger::Motion })));
    }

    #[test]
    fn no_trigger_without_movement_or_with_jitter() {
        let params = PolicyParams::default();
        let log = run(&params, 3000, 10, |t| if t % 20 == 0 { 4.0 } else { 20.0 }, |_| pattern(0));
        assert!(!log.iter().any(|(_, a)| matches!(a, Action::MotionTrigger)));
    }

    #[test]
    fn time_regression_is_rejected() {
        let params = PolicyParams::default();
        let mut st = PolicyState::<f64>::new(&params).unwrap();
        policy_step(&mut st, &params, 100, 0.0, None).unwrap();
        assert!(matches!(policy_step(&mut st, &params, 99, 0.0, None), Err(Error::TimeRegression { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(PolicyParams::default().validate().is_ok());
        for p in [
            PolicyParams { w_init_ms: 30, w_min_ms: 10, ..Default::default() },
            PolicyParams { w_min_ms: 2000, ..Default::default() },
            PolicyParams { delta_ms: 0, ..Default::default() },
            PolicyParams { theta_still_dps: 40.0, ..Default::default() },
            PolicyParams { tau_ssim: 1.5, ..Default::default() },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn change_score_examples() {
        let a = frame(pattern(1), 0);
        let s = change_score(&a, &a).unwrap();
        assert_eq!(s.ssim, 1.0);
        assert_eq!(s.psnr_db, f64::INFINITY);
        let brighter = frame(Image::from_fn(32, 24, |x, y| pattern(1).get(x, y).map(|v| (v * 0.8 + 0.1) * 1.01)), 0);
        let base = frame(Image::from_fn(32, 24, |x, y| pattern(1).get(x, y).map(|v| v * 0.8 + 0.1)), 0);
        assert!(change_score(&base, &brighter).unwrap().ssim > 0.95);
        let small = frame(Image::filled(16, 16, [0.0; 3]), 0);
        assert!(change_score(&a, &small).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        /// Per-window content ids; AIMD must follow the fold over "content
        /// differs from the previous window".
        #[test]
        fn aimd_follows_window_changes(ids in proptest::collection::vec(0u32..3, 4..12), w0 in 100u64..1500) {
            let params = PolicyParams { w_init_ms: w0.max(100), w_max_ms: 3000, ..Default::default() };
            let mut st = PolicyState::<f64>::new(&params).unwrap();
            let mut pending: Option<Frame<f64>> = None;
            let mut window = 0usize;
            let mut expected_w = params.w_init_ms;
            let mut prev_id: Option<u32> = None;
            let mut t = 0;
            while window < ids.len() {
                let acts = policy_step(&mut st, &params, t, 0.0, pending.as_ref()).unwrap();
                for a in &acts {
                    if let Action::WUpdate { from_ms, to_ms, ssim } = a {
                        let id = ids[window];
                        let changed = prev_id.is_some_and(|p| p != id);
                        prop_assert_eq!(*from_ms, expected_w);
                        prop_assert_eq!(ssim.unwrap() < params.tau_ssim, changed);
                        expected_w = if changed { (expected_w / 2).max(params.w_min_ms) } else { (expected_w + params.delta_ms).min(params.w_max_ms) };
                        prop_assert_eq!(*to_ms, expected_w);
                        prev_id = Some(id);
                        window += 1;
                    }
                }
                pending = (st.back_on && window < ids.len()).then(|| frame(pattern(ids[window]), t));
                t += 10;
            }
        }

        #[test]
        fn w_stays_in_bounds(imu in proptest::collection::vec(0.0..80.0f64, 50), seed in 0u32..5) {
            let params = PolicyParams { w_init_ms: 400, w_min_ms: 100, w_max_ms: 1200, ..Default::default() };
            let log = run(&params, 4900, 100, |t| imu[(t / 100) as usize], |t| pattern((t as u32 / 300 + seed) % 3));
            // Every motion trigger is preceded by a step above theta_move.
            for (t, a) in &log {
                if matches!(a, Action::MotionTrigger) {
                    prop_assert!((0..*t).step_by(100).any(|s| imu[(s / 100) as usize] > params.theta_move_dps));
                }
            }
        }
    }
}
