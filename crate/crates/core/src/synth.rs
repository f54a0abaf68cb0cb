//! Synthetic CSI generation: a static multipath background plus one moving
//! human scatterer with gait-modulated speed, distance-dependent dynamic
//! power and independent per-subcarrier receiver noise.
//!
//! The moving body is modeled as a diffuse scatterer: its energy reaches the
//! receiver through a cluster of sub-paths with isotropically distributed
//! effective directions, so each sub-path's phase advances at its own share
//! `k * v * cos(theta_m)` of the carrier Doppler. The time autocorrelation of
//! the resulting power response follows the zero-order Bessel shape
//! `J0(k * v * dt)` that the speed estimator inverts — generator and
//! estimator share only that physics, not code. A single specular path would
//! instead produce a cosine autocorrelation and is deliberately not used.
//!
//! The cluster's mean delay tracks the round-trip `2 d(t) / c` (plus a fixed
//! geometric offset) across the band, which makes nearby motion a strong
//! *common* fluctuation over neighboring subcarriers while receiver noise
//! stays independent per subcarrier: exactly the contrast the proximity
//! feature measures. The dynamic amplitude decays as `d^(-ple/2)` with the
//! two-way path-loss exponent `ple`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csi::CsiFrame;
use crate::io::subcarrier_frequencies;
use crate::spectral::SPEED_OF_LIGHT;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("unknown preset `{0}` (expected approach_dwell_leave, empty_room, approach_abort or short_path)")]
    UnknownPreset(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// One static propagation path: complex gain at the carrier and its delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticPath {
    pub gain_re: f64,
    pub gain_im: f64,
    /// Propagation delay in seconds.
    pub delay: f64,
}

impl StaticPath {
    pub fn new(magnitude: f64, phase: f64, delay: f64) -> Self {
        let g = Complex64::from_polar(magnitude, phase);
        StaticPath { gain_re: g.re, gain_im: g.im, delay }
    }

    fn gain(&self) -> Complex64 {
        Complex64::new(self.gain_re, self.gain_im)
    }
}

/// Radio environment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scene {
    pub num_subcarriers: usize,
    /// Carrier center frequency, Hz.
    pub center_freq: f64,
    /// Channel bandwidth, Hz.
    pub bandwidth: f64,
    /// CSI sounding rate, Hz.
    pub sample_rate: f64,
    /// Static multipath background.
    pub static_paths: Vec<StaticPath>,
    /// Std of the complex receiver noise per subcarrier per sample
    /// (total noise power is `noise_sigma^2`).
    pub noise_sigma: f64,
    /// Dynamic-path amplitude at 1 m.
    pub dynamic_gain_ref: f64,
    /// Two-way power decay exponent; amplitude decays as `d^(-ple/2)`.
    pub path_loss_exponent: f64,
    /// Number of sub-paths in the diffuse scatter cluster.
    pub scatter_paths: usize,
    /// Mean of the exponential sub-path delay spread, seconds.
    pub scatter_delay_spread: f64,
    /// Fixed delay offset added to the round-trip `2 d / c`, seconds.
    pub geometric_delay_offset: f64,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            num_subcarriers: 56,
            center_freq: 5.18e9,
            bandwidth: 40e6,
            sample_rate: 1500.0,
            static_paths: vec![
                StaticPath::new(1.0, 0.0, 15e-9),
                StaticPath::new(0.45, 2.0, 55e-9),
                StaticPath::new(0.30, -1.1, 110e-9),
                StaticPath::new(0.18, 0.8, 190e-9),
            ],
            noise_sigma: 0.032,
            dynamic_gain_ref: 0.25,
            path_loss_exponent: 4.0,
            scatter_paths: 32,
            scatter_delay_spread: 40e-9,
            geometric_delay_offset: 10e-9,
        }
    }
}

impl Scene {
    /// A time-invariant scene: static paths only, no noise, no scatterer.
    pub fn static_only() -> Self {
        Scene { noise_sigma: 0.0, dynamic_gain_ref: 0.0, ..Scene::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::InvalidScene(m));
        if self.num_subcarriers == 0 {
            return err("num_subcarriers must be positive".into());
        }
        if !(self.sample_rate > 0.0) {
            return err(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if !(self.center_freq > 0.0) || !(self.bandwidth > 0.0) {
            return err("center_freq and bandwidth must be positive".into());
        }
        if self.noise_sigma < 0.0 {
            return err(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if self.static_paths.iter().any(|p| p.delay < 0.0) {
            return err("static path delays must be >= 0".into());
        }
        if self.dynamic_gain_ref < 0.0 || self.path_loss_exponent < 0.0 {
            return err("dynamic gain and path-loss exponent must be >= 0".into());
        }
        if self.dynamic_gain_ref > 0.0 && self.scatter_paths == 0 {
            return err("scatter_paths must be positive when a dynamic path is present".into());
        }
        Ok(())
    }
}

/// A commanded position on the walking path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Time the person is commanded to be at (or depart from) `distance`.
    pub t: f64,
    /// Distance from the device, meters.
    pub distance: f64,
}

/// A walking script: the person is at `waypoints[i].distance` at
/// `waypoints[i].t`; when the next waypoint's distance differs they depart at
/// `waypoints[i].t` and walk toward it at the gait-modulated `mean_speed`,
/// then hold position (with bounded micro-motion when `jitter_speed > 0`)
/// until the next waypoint time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    /// Walking speed, m/s.
    pub mean_speed: f64,
    /// Gait cycles per second; modulates the instantaneous speed.
    pub gait_rate: f64,
    /// Fractional speed modulation depth, in [0, 1).
    pub gait_depth: f64,
    /// Peak speed of micro-motion while holding position, m/s (0 disables).
    pub jitter_speed: f64,
}

impl Trajectory {
    /// A person standing still at `distance` for the whole scenario.
    pub fn stationary(distance: f64) -> Self {
        Trajectory {
            waypoints: vec![Waypoint { t: 0.0, distance }],
            mean_speed: 1.3,
            gait_rate: 1.0,
            gait_depth: 0.0,
            jitter_speed: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::InvalidTrajectory(m));
        if self.waypoints.is_empty() {
            return err("at least one waypoint required".into());
        }
        if self.waypoints.iter().any(|w| w.distance <= 0.0) {
            return err("waypoint distances must be positive".into());
        }
        if !self.waypoints.windows(2).all(|w| w[0].t < w[1].t) {
            return err("waypoint times must be strictly increasing".into());
        }
        if !(self.mean_speed > 0.0) {
            return err(format!("mean_speed must be positive, got {}", self.mean_speed));
        }
        if !(0.0..1.0).contains(&self.gait_depth) {
            return err(format!("gait_depth must be in [0, 1), got {}", self.gait_depth));
        }
        if self.gait_rate < 0.0 || self.jitter_speed < 0.0 {
            return err("gait_rate and jitter_speed must be >= 0".into());
        }
        Ok(())
    }
}

/// Interval during which the person is inside the proximate area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub enter_t: f64,
    pub exit_t: f64,
}

// ---------------------------------------------------------------------------
// trajectory realization

#[derive(Debug, Clone, Copy)]
enum Motion {
    Walking { target: f64, dir: f64 },
    Hold { anchor: f64 },
}

#[derive(Debug, Clone, Copy)]
enum Jitter {
    Still { until: f64 },
    Sway { start: f64, duration: f64, sign: f64 },
}

/// Frame-rate forward integrator of a trajectory: yields distance,
/// instantaneous speed and cumulative path length per frame.
struct TrajectorySampler {
    traj: Trajectory,
    rng: ChaCha12Rng,
    dt: f64,
    seg: usize,
    motion: Motion,
    jitter: Jitter,
    d: f64,
    path_len: f64,
    frame: u64,
}

impl TrajectorySampler {
    fn new(traj: &Trajectory, seed: u64, sample_rate: f64) -> Self {
        let d0 = traj.waypoints[0].distance;
        let mut s = TrajectorySampler {
            traj: traj.clone(),
            rng: ChaCha12Rng::seed_from_u64(seed),
            dt: 1.0 / sample_rate,
            seg: 0,
            motion: Motion::Hold { anchor: d0 },
            jitter: Jitter::Still { until: 0.0 },
            d: d0,
            path_len: 0.0,
            frame: 0,
        };
        s.enter_segment(0, 0.0);
        s
    }

    fn enter_segment(&mut self, seg: usize, t: f64) {
        self.seg = seg;
        let here = self.d;
        match self.traj.waypoints.get(seg + 1) {
            Some(next) if (next.distance - here).abs() > 1e-9 => {
                self.motion = Motion::Walking {
                    target: next.distance,
                    dir: (next.distance - here).signum(),
                };
            }
            _ => {
                self.motion = Motion::Hold { anchor: here };
                self.jitter = self.draw_still(t);
            }
        }
    }

    fn draw_still(&mut self, t: f64) -> Jitter {
        Jitter::Still { until: t + self.rng.gen_range(1.5..3.5) }
    }

    fn draw_sway(&mut self, t: f64, sign: f64) -> Jitter {
        Jitter::Sway { start: t, duration: self.rng.gen_range(0.8..1.8), sign }
    }

    /// Advances one frame; returns (t, distance, |speed|, path length).
    fn step(&mut self) -> (f64, f64, f64, f64) {
        let t = self.frame as f64 * self.dt;
        self.frame += 1;

        // segment rollover by commanded time
        while self
            .traj
            .waypoints
            .get(self.seg + 1)
            .map_or(false, |w| t >= w.t)
        {
            let next = self.seg + 1;
            // snap to the commanded position if the walk had not finished
            self.d = self.traj.waypoints[next].distance;
            self.enter_segment(next, t);
        }

        let mut speed = 0.0;
        match self.motion {
            Motion::Walking { target, dir } => {
                let gait =
                    1.0 + self.traj.gait_depth
                        * (2.0 * std::f64::consts::PI * self.traj.gait_rate * t).sin();
                speed = self.traj.mean_speed * gait;
                let step = dir * speed * self.dt;
                let remaining = target - self.d;
                if step.abs() >= remaining.abs() || remaining * dir <= 0.0 {
                    self.path_len += remaining.abs();
                    self.d = target;
                    self.motion = Motion::Hold { anchor: target };
                    self.jitter = self.draw_still(t);
                    speed = remaining.abs() / self.dt;
                } else {
                    self.d += step;
                    self.path_len += step.abs();
                }
            }
            Motion::Hold { anchor } => {
                if self.traj.jitter_speed > 0.0 {
                    match self.jitter {
                        Jitter::Still { until } => {
                            if t >= until {
                                let sign = if self.d > anchor { -1.0 } else { 1.0 };
                                self.jitter = self.draw_sway(t, sign);
                            }
                        }
                        Jitter::Sway { start, duration, sign } => {
                            if t >= start + duration {
                                self.jitter = self.draw_still(t);
                            } else {
                                let phase = (t - start) / duration * std::f64::consts::PI;
                                speed = self.traj.jitter_speed * phase.sin();
                                self.d += sign * speed * self.dt;
                                self.path_len += speed * self.dt;
                            }
                        }
                    }
                }
            }
        }
        (t, self.d, speed, self.path_len)
    }
}

// ---------------------------------------------------------------------------
// channel synthesis

/// Lazily synthesized CSI frame stream; O(1) memory in the stream length.
pub struct CsiStream {
    sampler: TrajectorySampler,
    rng: ChaCha12Rng,
    n_frames: u64,
    freqs: Arc<[f64]>,
    /// Static response per subcarrier (baseband phasing).
    static_resp: Vec<Complex64>,
    /// Sub-path mixing table, `[subcarrier][sub-path]`.
    mix: Vec<Vec<Complex64>>,
    /// cos(theta_m) per sub-path.
    cos_theta: Vec<f64>,
    /// Initial phase per sub-path.
    phi: Vec<f64>,
    /// Baseband frequency offsets per subcarrier.
    baseband: Vec<f64>,
    k_center: f64,
    inv_sqrt_m: f64,
    noise_component_sigma: f64,
    dynamic_gain_ref: f64,
    half_ple: f64,
    geometric_delay_offset: f64,
}

impl CsiStream {
    pub fn len(&self) -> u64 {
        self.n_frames
    }

    pub fn is_empty(&self) -> bool {
        self.n_frames == 0
    }

    pub fn subcarrier_freqs(&self) -> Arc<[f64]> {
        Arc::clone(&self.freqs)
    }
}

impl Iterator for CsiStream {
    type Item = CsiFrame;

    fn next(&mut self) -> Option<Self::Item> {
        if self.sampler.frame >= self.n_frames {
            return None;
        }
        let (t, d, _speed, path_len) = self.sampler.step();
        let n = self.static_resp.len();
        let mut csi = Vec::with_capacity(n);

        let dynamic = self.dynamic_gain_ref > 0.0;
        let mut sub = Vec::new();
        let mut amp = 0.0;
        let mut tau_c = 0.0;
        if dynamic {
            amp = self.inv_sqrt_m * self.dynamic_gain_ref / d.powf(self.half_ple);
            tau_c = 2.0 * d / SPEED_OF_LIGHT + self.geometric_delay_offset;
            sub = self
                .cos_theta
                .iter()
                .zip(&self.phi)
                .map(|(&ct, &p)| Complex64::from_polar(1.0, p + self.k_center * ct * path_len))
                .collect();
        }

        for sc in 0..n {
            let mut h = self.static_resp[sc];
            if dynamic {
                let mut acc = Complex64::new(0.0, 0.0);
                for (u, p) in sub.iter().zip(&self.mix[sc]) {
                    acc += u * p;
                }
                let cluster = Complex64::from_polar(
                    amp,
                    -2.0 * std::f64::consts::PI * self.baseband[sc] * tau_c,
                );
                h += cluster * acc;
            }
            if self.noise_component_sigma > 0.0 {
                let re: f64 = StandardNormal.sample(&mut self.rng);
                let im: f64 = StandardNormal.sample(&mut self.rng);
                h += Complex64::new(re, im) * self.noise_component_sigma;
            }
            csi.push(h);
        }
        Some(CsiFrame { timestamp: t, csi, subcarrier_freqs: Arc::clone(&self.freqs) })
    }
}

/// Synthesizes the CSI stream for a scene/trajectory pair and derives the
/// ground-truth proximity intervals (`distance <= proximate_radius`) at frame
/// resolution. Deterministic in `seed`.
pub fn generate_csi(
    scene: &Scene,
    traj: &Trajectory,
    duration: f64,
    seed: u64,
    proximate_radius: f64,
) -> Result<(CsiStream, Vec<GroundTruthEvent>), SynthError> {
    scene.validate()?;
    traj.validate()?;
    if !(duration > 0.0) {
        return Err(SynthError::InvalidScenario(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let n_frames = (duration * scene.sample_rate).round() as u64;
    let traj_seed = seed;
    let chan_seed = seed ^ 0x9E37_79B9_7F4A_7C15;

    // ground-truth pass: trajectory only
    let mut gt_sampler = TrajectorySampler::new(traj, traj_seed, scene.sample_rate);
    let mut events = Vec::new();
    let mut inside_since: Option<f64> = None;
    let mut last_t = 0.0;
    for _ in 0..n_frames {
        let (t, d, _, _) = gt_sampler.step();
        last_t = t;
        if d <= 0.0 {
            return Err(SynthError::InvalidScenario(format!(
                "distance became non-positive at t={t:.3}s"
            )));
        }
        match (d <= proximate_radius, inside_since) {
            (true, None) => inside_since = Some(t),
            (false, Some(enter_t)) => {
                events.push(GroundTruthEvent { enter_t, exit_t: t });
                inside_since = None;
            }
            _ => {}
        }
    }
    if let Some(enter_t) = inside_since {
        events.push(GroundTruthEvent { enter_t, exit_t: last_t });
    }

    // channel setup
    let freqs = subcarrier_frequencies(scene.center_freq, scene.bandwidth, scene.num_subcarriers);
    let baseband: Vec<f64> = freqs.iter().map(|&f| f - scene.center_freq).collect();
    let static_resp: Vec<Complex64> = baseband
        .iter()
        .map(|&fb| {
            scene
                .static_paths
                .iter()
                .map(|p| {
                    p.gain()
                        * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * fb * p.delay)
                })
                .sum()
        })
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(chan_seed);
    let m = scene.scatter_paths.max(1);
    // evenly spaced directions with a random rotation: an M-point quadrature
    // of the isotropic ring
    let rot: f64 = rng.gen_range(0.0..1.0);
    let cos_theta: Vec<f64> = (0..m)
        .map(|i| (2.0 * std::f64::consts::PI * (i as f64 + rot) / m as f64).cos())
        .collect();
    let phi: Vec<f64> =
        (0..m).map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI)).collect();
    let delays: Vec<f64> = (0..m)
        .map(|_| {
            let u: f64 = rng.gen_range(0.0f64..1.0).max(1e-12);
            (-u.ln() * scene.scatter_delay_spread).min(5.0 * scene.scatter_delay_spread)
        })
        .collect();
    let mix: Vec<Vec<Complex64>> = baseband
        .iter()
        .map(|&fb| {
            delays
                .iter()
                .map(|&tau| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * fb * tau))
                .collect()
        })
        .collect();

    let stream = CsiStream {
        sampler: TrajectorySampler::new(traj, traj_seed, scene.sample_rate),
        rng,
        n_frames,
        freqs,
        static_resp,
        mix,
        cos_theta,
        phi,
        baseband,
        k_center: 2.0 * std::f64::consts::PI * scene.center_freq / SPEED_OF_LIGHT,
        inv_sqrt_m: 1.0 / (m as f64).sqrt(),
        noise_component_sigma: scene.noise_sigma / std::f64::consts::SQRT_2,
        dynamic_gain_ref: scene.dynamic_gain_ref,
        half_ple: scene.path_loss_exponent / 2.0,
        geometric_delay_offset: scene.geometric_delay_offset,
    };
    Ok((stream, events))
}

// ---------------------------------------------------------------------------
// presets

/// Built-in scenario families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    ApproachDwellLeave,
    EmptyRoom,
    ApproachAbort,
    ShortPath,
}

impl std::str::FromStr for Preset {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "approach_dwell_leave" => Ok(Preset::ApproachDwellLeave),
            "empty_room" => Ok(Preset::EmptyRoom),
            "approach_abort" => Ok(Preset::ApproachAbort),
            "short_path" => Ok(Preset::ShortPath),
            other => Err(SynthError::UnknownPreset(other.to_string())),
        }
    }
}

/// A fully resolved scenario: scene, walking script and stream length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scene: Scene,
    pub trajectory: Trajectory,
    pub duration: f64,
}

/// Distance the walker stops at in front of the device, meters.
pub const DWELL_DISTANCE: f64 = 0.5;
/// Lead-in stillness before any scripted motion, seconds.
const PRE_ROLL_S: f64 = 4.0;

/// Builds one of the named scenarios. `seed` shapes the randomized parts of
/// the script (wander targets, micro-motion timing); the same seed always
/// yields the same scenario.
pub fn preset_scenario(preset: Preset, seed: u64) -> ScenarioSpec {
    match preset {
        Preset::ApproachDwellLeave => approach_dwell_leave(6.0, 30.0),
        Preset::ShortPath => approach_dwell_leave(3.0, 30.0),
        Preset::EmptyRoom => empty_room(300.0, seed),
        Preset::ApproachAbort => approach_abort(),
    }
}

/// Walk in from `start_m`, dwell with micro-motion, walk back out.
pub fn approach_dwell_leave(start_m: f64, dwell_s: f64) -> ScenarioSpec {
    let speed = 1.3;
    let walk = (start_m - DWELL_DISTANCE) / speed;
    let t_depart = PRE_ROLL_S;
    let t_arrive = t_depart + walk;
    let t_leave = t_arrive + dwell_s;
    let t_back = t_leave + walk;
    let duration = t_back + 6.0;
    ScenarioSpec {
        scene: Scene::default(),
        trajectory: Trajectory {
            waypoints: vec![
                Waypoint { t: 0.0, distance: start_m },
                Waypoint { t: t_depart, distance: start_m },
                Waypoint { t: t_arrive, distance: DWELL_DISTANCE },
                Waypoint { t: t_leave, distance: DWELL_DISTANCE },
                Waypoint { t: t_back, distance: start_m },
            ],
            mean_speed: speed,
            gait_rate: 1.0,
            gait_depth: 0.4,
            jitter_speed: 0.1,
        },
        duration,
    }
}

/// A person wandering well outside the proximate area for the whole capture:
/// the false-alarm stress scenario. No ground-truth events.
pub fn empty_room(duration: f64, seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5851_F42D_4C95_7F2D);
    let speed = 1.3;
    let mut waypoints = vec![Waypoint { t: 0.0, distance: 6.0 }];
    let mut t = 0.0;
    let mut d: f64 = 6.0;
    while t < duration + 10.0 {
        let mut target: f64 = rng.gen_range(4.0..8.5);
        if (target - d).abs() < 1.0 {
            target = if d < 6.0 { d + 1.5 } else { d - 1.5 };
        }
        let hold = rng.gen_range(3.0..8.0);
        t += (target - d).abs() / speed + hold;
        d = target;
        waypoints.push(Waypoint { t, distance: d });
    }
    ScenarioSpec {
        scene: Scene::default(),
        trajectory: Trajectory {
            waypoints,
            mean_speed: speed,
            gait_rate: 1.0,
            gait_depth: 0.4,
            jitter_speed: 0.05,
        },
        duration,
    }
}

/// Walk toward the device but turn around before reaching the proximate
/// area. No ground-truth events; exercises the approach timeout.
pub fn approach_abort() -> ScenarioSpec {
    let speed = 1.3;
    let turn_at = 2.5;
    let walk = (6.0 - turn_at) / speed;
    let t_depart = PRE_ROLL_S;
    let t_arrive = t_depart + walk;
    let t_leave = t_arrive + 8.0;
    let t_back = t_leave + walk;
    let duration = t_back + 15.0;
    ScenarioSpec {
        scene: Scene::default(),
        trajectory: Trajectory {
            waypoints: vec![
                Waypoint { t: 0.0, distance: 6.0 },
                Waypoint { t: t_depart, distance: 6.0 },
                Waypoint { t: t_arrive, distance: turn_at },
                Waypoint { t: t_leave, distance: turn_at },
                Waypoint { t: t_back, distance: 6.0 },
            ],
            mean_speed: speed,
            gait_rate: 1.0,
            gait_depth: 0.4,
            jitter_speed: 0.1,
        },
        duration,
    }
}

/// Sustained small-amplitude motion at a fixed distance: swings of
/// `+-0.25 m` around `distance` at `speed`. With `irregular` the swing
/// periods are seed-jittered, giving motion without a gait rhythm.
pub fn oscillating_dwell(distance: f64, speed: f64, duration: f64, irregular: bool, seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x94D0_49BB_1331_11EB);
    let half_swing = 0.25;
    let mut waypoints = vec![Waypoint { t: 0.0, distance }];
    let mut t = 0.0;
    let mut at_far = false;
    while t < duration + 5.0 {
        let leg = if waypoints.len() == 1 { half_swing } else { 2.0 * half_swing };
        let mut leg_t = leg / speed;
        if irregular {
            leg_t *= rng.gen_range(0.6..1.7);
        }
        t += leg_t;
        let next = if at_far { distance - half_swing } else { distance + half_swing };
        at_far = !at_far;
        waypoints.push(Waypoint { t, distance: next });
    }
    ScenarioSpec {
        scene: Scene::default(),
        trajectory: Trajectory {
            waypoints,
            mean_speed: speed,
            gait_rate: 1.0,
            gait_depth: 0.0,
            jitter_speed: 0.0,
        },
        duration,
    }
}

// ---------------------------------------------------------------------------
// scenario documents (JSON)

/// JSON scenario description: either a preset name with optional overrides,
/// or a fully custom scene/trajectory/duration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Start distance override for approach presets, meters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_distance_m: Option<f64>,
    /// Dwell duration override for approach presets, seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dwell_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<Scene>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
}

impl ScenarioDoc {
    /// Resolves the document to a concrete scenario and the seed to run it
    /// with. `fallback_seed` applies when the document carries none.
    pub fn resolve(&self, fallback_seed: u64) -> Result<(ScenarioSpec, u64), SynthError> {
        let seed = self.seed.unwrap_or(fallback_seed);
        let mut spec = match (&self.preset, &self.trajectory) {
            (Some(name), _) => {
                let preset: Preset = name.parse()?;
                let mut spec = match preset {
                    Preset::ApproachDwellLeave | Preset::ShortPath => {
                        let default_start = if preset == Preset::ShortPath { 3.0 } else { 6.0 };
                        approach_dwell_leave(
                            self.start_distance_m.unwrap_or(default_start),
                            self.dwell_s.unwrap_or(30.0),
                        )
                    }
                    Preset::EmptyRoom => {
                        empty_room(self.duration.unwrap_or(300.0), seed)
                    }
                    Preset::ApproachAbort => approach_abort(),
                };
                if let Some(d) = self.duration {
                    spec.duration = d;
                }
                spec
            }
            (None, Some(traj)) => {
                let duration = self.duration.ok_or_else(|| {
                    SynthError::InvalidScenario(
                        "custom scenarios require an explicit duration".into(),
                    )
                })?;
                ScenarioSpec { scene: Scene::default(), trajectory: traj.clone(), duration }
            }
            (None, None) => {
                return Err(SynthError::InvalidScenario(
                    "scenario needs either a preset or a trajectory".into(),
                ))
            }
        };
        if let Some(scene) = &self.scene {
            spec.scene = scene.clone();
        }
        Ok((spec, seed))
    }
}
