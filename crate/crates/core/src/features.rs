//! Per-step feature extraction: the adjacent-subcarrier proximity feature,
//! its slope, walking-speed plausibility, gait-cycle rate and the fused gait
//! score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csi::PowerSeries;
use crate::spectral::SpeedEstimate;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("proximity feature needs >= 2 subcarriers, got {0}")]
    TooFewSubcarriers(usize),
    #[error("proximity feature needs >= {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
}

/// Minimum samples for a meaningful adjacent-subcarrier correlation.
pub const MIN_FP_SAMPLES: usize = 10;

/// Prominence floor (m/s) for counting speed peaks as gait cycles.
pub const GAIT_PEAK_PROMINENCE: f64 = 0.1;

/// Gait cycles require sustained motion: at least this fraction of the
/// window's speed samples must exceed [`MIN_MOVING_SPEED`], otherwise the
/// cycle rate is 0. Isolated speed spikes (micro-motion bursts, estimator
/// flukes) are not gait.
pub const MIN_MOVING_FRACTION: f64 = 0.6;

/// Speed below which a sample does not count as motion, m/s.
pub const MIN_MOVING_SPEED: f64 = 0.2;

/// One fused feature sample, the unit the state machine consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSample {
    /// Sample time, seconds.
    pub t: f64,
    /// Proximity feature: mean Pearson correlation between adjacent
    /// subcarriers' power series. Nominal range [-1, 1], practically [0, 1].
    pub fp: f64,
    /// Slope of `fp` over the trailing slope window, 1/seconds.
    pub fs: f64,
    /// Estimated walking speed, m/s (0 when none).
    pub v_hat: f64,
    /// Gait-cycle rate, cycles/second (0 when not ready).
    pub c: f64,
    /// Gait score, >= 0; positive only for walking-like motion.
    pub fg: f64,
}

/// Pedestrian walking-speed statistics and the admissible gait-cycle band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub mean_speed: f64,
    pub std_speed: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        // Mean and spread of normal pedestrian walking speed; gait cycles for
        // normal walking fall between 0.5 and 1.5 per second.
        GaitParams { mean_speed: 1.34, std_speed: 0.37, c_min: 0.5, c_max: 1.5 }
    }
}

/// Proximity feature: `Fp = mean over adjacent pairs of corr(G(f_n), G(f_{n+1}))`
/// where the correlation is Pearson over time. A pair with a zero-variance
/// member contributes 0.
pub fn proximity_feature(window: &PowerSeries) -> Result<f64, FeatureError> {
    let ns = window.num_subcarriers;
    if ns < 2 {
        return Err(FeatureError::TooFewSubcarriers(ns));
    }
    let n = window.len();
    if n < MIN_FP_SAMPLES {
        return Err(FeatureError::TooFewSamples { got: n, need: MIN_FP_SAMPLES });
    }
    let mut total = 0.0;
    let mut prev = window.column(0);
    for sc in 1..ns {
        let cur = window.column(sc);
        total += pearson(&prev, &cur);
        prev = cur;
    }
    Ok(total / (ns - 1) as f64)
}

/// Pearson correlation; 0 when either series has zero variance.
pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Ordinary least-squares slope of timestamped values over the trailing
/// `window` seconds. `None` when fewer than 3 samples fall in the window.
pub fn slope(history: &[(f64, f64)], window: f64) -> Option<f64> {
    let t_end = history.last()?.0;
    let start = t_end - window;
    let pts: Vec<&(f64, f64)> = history.iter().filter(|(t, _)| *t >= start).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mv = pts.iter().map(|(_, v)| v).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (t, v) in pts {
        let dt = t - mt;
        num += dt * (v - mv);
        den += dt * dt;
    }
    if den <= 0.0 {
        return None;
    }
    Some(num / den)
}

/// Probability that an observed speed came from human walking:
/// `p(v) = 1 - 2 * |Phi((v - mean) / std) - 0.5|`, where `Phi` is the
/// standard normal CDF. Equals 1 at the mean and decays symmetrically.
pub fn walking_speed_probability(v: f64, params: &GaitParams) -> f64 {
    debug_assert!(v >= 0.0, "speed must be non-negative");
    let z = (v - params.mean_speed) / params.std_speed;
    1.0 - 2.0 * (normal_cdf(z) - 0.5).abs()
}

/// Standard normal CDF via the complementary error function.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Gait-cycle rate: prominent peaks of the speed series over the trailing
/// `window` seconds, divided by the window length. `None` until the history
/// spans the window. A 3-tap median pre-filter suppresses single-sample
/// spikes before peak counting, and a window whose speed samples are not
/// mostly in motion (see [`MIN_MOVING_FRACTION`]) has no cycles at all.
pub fn gait_cycle_rate(speed_history: &[(f64, f64)], window: f64) -> Option<f64> {
    let t_end = speed_history.last()?.0;
    let t_start = speed_history.first()?.0;
    if t_end - t_start < window {
        return None;
    }
    let start = t_end - window;
    let vals: Vec<f64> =
        speed_history.iter().filter(|(t, _)| *t >= start).map(|(_, v)| *v).collect();
    if vals.len() < 3 {
        return None;
    }
    let moving = vals.iter().filter(|&&v| v > MIN_MOVING_SPEED).count();
    if (moving as f64) < MIN_MOVING_FRACTION * vals.len() as f64 {
        return Some(0.0);
    }
    let filtered = median3(&vals);
    let peaks = count_prominent_peaks(&filtered, GAIT_PEAK_PROMINENCE);
    Some(peaks as f64 / window)
}

fn median3(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 || i == n - 1 {
            out.push(x[i]);
        } else {
            let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
            out.push(a.max(b.min(c)).min(b.max(c)));
        }
    }
    out
}

/// Counts local maxima whose topographic prominence reaches `floor`.
/// Prominence uses the usual contour rule: walk outward from the peak until a
/// strictly higher sample or the window edge, take the minimum of each walk,
/// and measure against the higher of the two minima.
pub(crate) fn count_prominent_peaks(x: &[f64], floor: f64) -> usize {
    let n = x.len();
    let mut count = 0;
    for i in 1..n.saturating_sub(1) {
        if !(x[i] > x[i - 1] && x[i] >= x[i + 1]) {
            continue;
        }
        let mut left_min = x[i];
        for j in (0..i).rev() {
            if x[j] > x[i] {
                break;
            }
            left_min = left_min.min(x[j]);
        }
        let mut right_min = x[i];
        for &v in &x[i + 1..] {
            if v > x[i] {
                break;
            }
            right_min = right_min.min(v);
        }
        if x[i] - left_min.max(right_min) >= floor {
            count += 1;
        }
    }
    count
}

/// Gait score `Fg = w * p(v) * 1(w > 0) * 1(c_min <= c <= c_max)` where `w`
/// is the swing asymmetry of the ACF differential (valley rise minus peak
/// fall) and `w = 0` when no feature point was detected.
pub fn gait_score(est: &SpeedEstimate, c: f64, params: &GaitParams) -> f64 {
    if !est.found {
        return 0.0;
    }
    let w = est.valley_prominence - est.peak_prominence;
    if w <= 0.0 || c < params.c_min || c > params.c_max {
        return 0.0;
    }
    w * walking_speed_probability(est.v_hat, params)
}
