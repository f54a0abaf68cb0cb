//! Per-window autocorrelation of the power response, its lag-differential,
//! and walking-speed estimation from the Bessel feature point.
//!
//! Under the statistical channel model the ACF of the power response behaves
//! like `g(f) * J0(k * v * dt)`. Its lag derivative is proportional to
//! `-J1(k * v * dt)`, whose first extremum sits at the first maximum of J1,
//! `x1 = 1.84118`. Locating the first valley of the ACF differential at lag
//! `dt*` therefore inverts to `v = x1 / (k * dt*)`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::csi::PowerSeries;

/// First maximum of the Bessel function J1.
pub const FIRST_J1_MAX: f64 = 1.84118;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Minimum prominence (in units of the per-window max |acf_diff|) for a
/// valley to qualify as the Bessel feature point.
pub const PROMINENCE_FLOOR: f64 = 0.02;

/// Minimum mean clipped lag-1 autocorrelation across subcarriers for a window
/// to count as carrying motion at all. Pure receiver noise sits near
/// `1/sqrt(2*pi*n)` (about 0.016 for a 600-sample window); moving scenes sit
/// an order of magnitude higher.
pub const MIN_MOTION_STAT: f64 = 0.05;

/// Minimum peak-to-trough swing of the combined ACF itself. A flat ACF means
/// the series is dominated by a static component and carries no speed
/// information regardless of how its (noise-scale) differential wiggles.
pub const MIN_ACF_SWING: f64 = 0.1;

/// Lag span of the centered moving average applied to the ACF differential
/// before extremum search, in seconds.
const DIFF_SMOOTH_SPAN_S: f64 = 5e-3;

/// The matched-scale Gaussian derivative filter places the Bessel-model
/// minimum 0.90% short of the true feature lag (a scale-free property of the
/// sigma = lag/3 filter on the `J0(k v dt)` family, measured on the noiseless
/// model across the walking-speed range). Refined lags are stretched by this
/// factor to undo it.
const VALLEY_LAG_DEBIAS: f64 = 1.0090;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("window of {got} samples is too short for max_lag={max_lag}s at {rate}Hz (need >= {need})")]
    WindowTooShort { got: usize, need: usize, max_lag: f64, rate: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Per-subcarrier sample autocorrelations over a common lag grid.
#[derive(Debug, Clone)]
pub struct AcfMatrix {
    /// Lags in seconds, starting at 0.
    pub lags: Vec<f64>,
    /// One autocorrelation column per subcarrier; all-zero for subcarriers
    /// excluded by the zero-variance rule.
    pub columns: Vec<Vec<f64>>,
    /// Clipped lag-1 autocorrelation per subcarrier, `max(rho(1), 0)`; zero
    /// for excluded subcarriers.
    pub lag1_clipped: Vec<f64>,
}

/// Combined ACF over lags with its lag-derivative and combination weights.
#[derive(Debug, Clone)]
pub struct AcfResult {
    /// End time of the window this ACF was computed over.
    pub window_end: f64,
    /// Lags in seconds, strictly increasing from 0.
    pub lags: Vec<f64>,
    /// Combined ACF per lag; `acf[0] = 1` whenever any subcarrier qualified.
    pub acf: Vec<f64>,
    /// Lag-derivative of `acf` (1/seconds), one value per lag after the
    /// first: central differences in the interior, backward at the end.
    /// `acf_diff[j]` estimates the derivative at `lags[j + 1]`.
    pub acf_diff: Vec<f64>,
    /// Normalized combination weight per subcarrier (sums to 1 unless
    /// degenerate).
    pub per_subcarrier_weight: Vec<f64>,
    /// Mean clipped lag-1 autocorrelation across all subcarriers, before
    /// weight normalization. Serves as the motion statistic of the window.
    pub motion_stat: f64,
    /// True when no subcarrier had positive weight; `acf` is all zeros then.
    pub degenerate: bool,
}

impl AcfResult {
    /// Recomputes `acf_diff` from `lags`/`acf`. Useful when building results
    /// by hand (tests, file loaders).
    pub fn with_diff(mut self) -> Self {
        self.acf_diff = diff_over_lag(&self.lags, &self.acf);
        self
    }
}

/// Walking-speed read-off from one ACF window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate {
    /// Estimated speed in m/s; 0 when nothing was found.
    pub v_hat: f64,
    /// Lag of the qualifying valley of the ACF differential, seconds.
    pub valley_lag: f64,
    /// Rise out of the valley up to the first subsequent peak of the ACF
    /// differential, in units of the window's max |acf_diff|.
    pub valley_prominence: f64,
    /// Fall from that peak down to its following trough, same units.
    pub peak_prominence: f64,
    /// Whether a qualifying feature point was found.
    pub found: bool,
}

impl SpeedEstimate {
    pub fn not_found() -> Self {
        SpeedEstimate {
            v_hat: 0.0,
            valley_lag: 0.0,
            valley_prominence: 0.0,
            peak_prominence: 0.0,
            found: false,
        }
    }
}

impl Default for SpeedEstimate {
    fn default() -> Self {
        Self::not_found()
    }
}

/// Wave number `k = 2*pi*f / c` in rad/m.
pub fn wave_number(center_freq: f64) -> f64 {
    assert!(center_freq > 0.0, "center frequency must be positive");
    2.0 * std::f64::consts::PI * center_freq / SPEED_OF_LIGHT
}

/// Unbiased-normalized sample autocorrelation per subcarrier:
/// `rho(l) = sum (x_t - xbar)(x_{t+l} - xbar) / ((n - l) * s^2)` with
/// `s^2 = sum (x_t - xbar)^2 / n`, so `rho(0) = 1` exactly.
///
/// Zero-variance subcarriers are excluded: their column is all zeros and
/// their clipped lag-1 value is 0.
pub fn acf_per_subcarrier(window: &PowerSeries, max_lag: f64) -> Result<AcfMatrix, SpectralError> {
    if !(max_lag > 0.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "max_lag must be positive, got {max_lag}"
        )));
    }
    let n = window.len();
    let num_lags = (max_lag * window.sample_rate).round() as usize + 1;
    if n < 2 * (num_lags - 1) || n < 2 {
        return Err(SpectralError::WindowTooShort {
            got: n,
            need: 2 * (num_lags - 1),
            max_lag,
            rate: window.sample_rate,
        });
    }

    let dt = 1.0 / window.sample_rate;
    let lags: Vec<f64> = (0..num_lags).map(|l| l as f64 * dt).collect();

    // Wiener-Khinchin with zero padding gives the linear (non-circular)
    // lagged sums; two real series are packed per complex FFT.
    let fft_len = (n + num_lags).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let ns = window.num_subcarriers;
    let mut columns = vec![Vec::new(); ns];
    let mut lag1 = vec![0.0; ns];
    let mut demeaned: Vec<Vec<f64>> = Vec::with_capacity(ns);
    // Zero-variance exclusion thresholds, relative to each column's scale so
    // that a constant column's rounding residue never counts as variance.
    let mut var_floor = vec![0.0f64; ns];
    for sc in 0..ns {
        let col = window.column(sc);
        let mean = col.iter().sum::<f64>() / n as f64;
        let scale = col.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        var_floor[sc] = n as f64 * (1e-12 * scale).powi(2);
        demeaned.push(col.iter().map(|&v| v - mean).collect());
    }

    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    let mut spec_a = vec![Complex::new(0.0, 0.0); fft_len];
    let mut pair = [0usize; 2];
    let mut sc = 0;
    while sc < ns {
        let take = (ns - sc).min(2);
        pair[0] = sc;
        pair[1] = if take == 2 { sc + 1 } else { sc };
        for v in buf.iter_mut() {
            *v = Complex::new(0.0, 0.0);
        }
        for t in 0..n {
            buf[t] = Complex::new(
                demeaned[pair[0]][t],
                if take == 2 { demeaned[pair[1]][t] } else { 0.0 },
            );
        }
        fwd.process(&mut buf);
        // Power spectra of both packed series: |A|^2 + |B|^2 is even/odd
        // separable; pack them back as real + j*imag for one inverse FFT.
        for k in 0..fft_len {
            let z = buf[k];
            let zc = buf[(fft_len - k) % fft_len].conj();
            let a = 0.5 * (z + zc);
            let b = Complex::new(0.0, -0.5) * (z - zc);
            spec_a[k] = Complex::new(a.norm_sqr(), b.norm_sqr());
        }
        spec_a.iter_mut().for_each(|v| *v /= fft_len as f64);
        inv.process(&mut spec_a);
        for (slot, which) in [(0usize, 0usize), (1, 1)][..take].iter() {
            let sums: Vec<f64> = (0..num_lags)
                .map(|l| {
                    let c = spec_a[l];
                    if *which == 0 {
                        c.re
                    } else {
                        c.im
                    }
                })
                .collect();
            let idx = pair[*slot];
            let c0 = sums[0];
            let c0_direct: f64 = demeaned[idx].iter().map(|&v| v * v).sum();
            if c0 <= 0.0 || c0_direct <= var_floor[idx] {
                columns[idx] = vec![0.0; num_lags];
                lag1[idx] = 0.0;
            } else {
                let col: Vec<f64> = sums
                    .iter()
                    .enumerate()
                    .map(|(l, &s)| s * n as f64 / ((n - l) as f64 * c0))
                    .collect();
                lag1[idx] = col.get(1).copied().unwrap_or(0.0).max(0.0);
                columns[idx] = col;
            }
        }
        sc += take;
    }

    Ok(AcfMatrix { lags, columns, lag1_clipped: lag1 })
}

/// Combines per-subcarrier ACFs into one curve: each subcarrier is weighted
/// by its clipped lag-1 autocorrelation (normalized to sum 1), the standard
/// motion-statistic proxy for the per-subcarrier gain.
pub fn combine_acf(matrix: &AcfMatrix, window_end: f64) -> AcfResult {
    let num_lags = matrix.lags.len();
    let ns = matrix.columns.len();
    let total: f64 = matrix.lag1_clipped.iter().sum();
    let motion_stat = if ns > 0 { total / ns as f64 } else { 0.0 };

    if total <= 0.0 {
        return AcfResult {
            window_end,
            lags: matrix.lags.clone(),
            acf: vec![0.0; num_lags],
            acf_diff: vec![0.0; num_lags.saturating_sub(1)],
            per_subcarrier_weight: vec![0.0; ns],
            motion_stat,
            degenerate: true,
        };
    }

    let weights: Vec<f64> = matrix.lag1_clipped.iter().map(|&w| w / total).collect();
    let mut acf = vec![0.0; num_lags];
    for (col, &w) in matrix.columns.iter().zip(&weights) {
        if w == 0.0 {
            continue;
        }
        for (a, &v) in acf.iter_mut().zip(col) {
            *a += w * v;
        }
    }
    let acf_diff = diff_over_lag(&matrix.lags, &acf);
    AcfResult {
        window_end,
        lags: matrix.lags.clone(),
        acf,
        acf_diff,
        per_subcarrier_weight: weights,
        motion_stat,
        degenerate: false,
    }
}

/// Derivative of `acf` over lag: central differences at interior lags,
/// backward difference at the last lag. Entry `j` estimates the derivative at
/// `lags[j + 1]`; the lag-0 point is omitted (the ACF is even there).
fn diff_over_lag(lags: &[f64], acf: &[f64]) -> Vec<f64> {
    let n = lags.len();
    if n < 2 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n - 1);
    for i in 1..n {
        let d = if i + 1 < n {
            (acf[i + 1] - acf[i - 1]) / (lags[i + 1] - lags[i - 1])
        } else {
            (acf[i] - acf[i - 1]) / (lags[i] - lags[i - 1])
        };
        out.push(d);
    }
    out
}

/// Reads walking speed off one combined ACF.
///
/// The deepest descent point of the (lightly smoothed, max-abs-normalized)
/// ACF differential — for a Bessel-shaped differential, its first valley —
/// is taken as the feature point, provided it is negative and rises by at
/// least [`PROMINENCE_FLOOR`] toward the following peak. The valley lag is
/// then refined at matched scale: a derivative-of-Gaussian filter whose width
/// tracks the coarse lag re-estimates the differential around the basin, and
/// parabolic interpolation gives the sub-sample position inverted through
/// `v = FIRST_J1_MAX / (k * lag)`.
///
/// The recorded prominences are swing heights on the normalized differential:
/// `valley_prominence` is the rise from the valley to the first subsequent
/// peak, `peak_prominence` the fall from that peak to its following trough.
/// For a Bessel-shaped (decaying-oscillation) differential the rise exceeds
/// the fall; for a pure cosine they tie; for noise they are symmetric on
/// average. Their difference is the gait-score weight upstream.
///
/// Quasi-static windows — degenerate combinations, motion statistic below
/// [`MIN_MOTION_STAT`], or an ACF swing below [`MIN_ACF_SWING`] — return
/// `found = false`. This is not an error.
pub fn estimate_speed(acf: &AcfResult, wave_number: f64) -> SpeedEstimate {
    assert!(wave_number > 0.0, "wave number must be positive");
    if acf.degenerate || acf.motion_stat < MIN_MOTION_STAT {
        return SpeedEstimate::not_found();
    }
    let n_diff = acf.acf_diff.len();
    if n_diff < 3 || acf.lags.len() != n_diff + 1 {
        return SpeedEstimate::not_found();
    }
    let (acf_min, acf_max) = min_max(&acf.acf);
    if acf_max - acf_min < MIN_ACF_SWING {
        return SpeedEstimate::not_found();
    }

    // Coarse pass: light centered smoothing, enough to locate the right basin.
    let dlag = acf.lags[1] - acf.lags[0];
    let half = ((DIFF_SMOOTH_SPAN_S / dlag - 1.0) / 2.0).round().max(0.0) as usize;
    let smooth = moving_average(&acf.acf_diff, half);

    // The uncorrelated noise floor puts a one-sample cliff between lag 0 and
    // lag 1 whose descent dwarfs any Bessel feature; everything the smoothing
    // can bleed it into is an artifact region, excluded from normalization
    // and search alike.
    let start = (2 * half + 3).min(n_diff.saturating_sub(3)).max(1);

    let max_abs = smooth[start..].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max_abs <= 0.0 {
        return SpeedEstimate::not_found();
    }
    let nd: Vec<f64> = smooth.iter().map(|&v| v / max_abs).collect();

    // Deepest negative point of the normalized differential past the
    // artifact region.
    let mut vi = start;
    let mut best = f64::INFINITY;
    for i in start..n_diff - 1 {
        if nd[i] < best {
            best = nd[i];
            vi = i;
        }
    }
    if !(best < 0.0) {
        return SpeedEstimate::not_found();
    }
    let (peak_idx, peak_val) = next_local_max(&nd, vi);
    if peak_val - nd[vi] < PROMINENCE_FLOOR {
        return SpeedEstimate::not_found();
    }
    let valley_prominence = peak_val - nd[vi];
    let peak_prominence = match peak_idx {
        Some(pi) => {
            let (_, trough_val) = next_local_min(&nd, pi);
            peak_val - trough_val
        }
        None => 0.0,
    };

    // Matched-scale refinement, iterated so the filter width tracks the
    // estimate; started from both coarse scales to avoid noise basins.
    // acf_diff[j] sits at lags[j + 1].
    // The wide-scale minimum locates the basin: heavier smoothing trades
    // attenuation (harmless for position, the kernel is symmetric) for the
    // noise suppression the fine scale lacks. The fine-scale minimum is only
    // a fallback when the wide pass turns up nothing negative.
    let wide_half = (half * 3).max(10).min(n_diff / 4);
    let wide = moving_average(&acf.acf_diff, wide_half);
    let wide_start = (2 * wide_half + 3).min(n_diff.saturating_sub(3)).max(1);
    let mut wi = wide_start;
    let mut wbest = f64::INFINITY;
    for i in wide_start..n_diff - 1 {
        if wide[i] < wbest {
            wbest = wide[i];
            wi = i;
        }
    }
    let mut candidates = vec![vi + 1];
    if wbest < 0.0 && wi + 1 != vi + 1 {
        candidates.push(wi + 1);
    }

    // Refine every candidate, then let the wide curve arbitrate: its noise
    // level is uniform over lag, so comparing candidate depths there carries
    // no small-scale noise bias.
    let mut refined: Option<(f64, f64)> = None; // (idx, wide score)
    for &cand in &candidates {
        let mut idx = cand as f64;
        let mut converged = false;
        for _ in 0..3 {
            match refine_valley(&acf.acf, idx.round().max(1.0) as usize, start) {
                Some((next, _)) => {
                    converged = true;
                    let done = (next - idx).abs() < 0.25;
                    idx = next;
                    if done {
                        break;
                    }
                }
                None => break,
            }
        }
        if !converged {
            continue;
        }
        let wide_idx =
            ((idx.round() as isize - 1).max(wide_start as isize) as usize).min(n_diff - 1);
        let score = wide[wide_idx];
        if refined.map_or(true, |(_, best)| score < best) {
            refined = Some((idx, score));
        }
    }
    let valley_lag = match refined {
        Some((idx, _)) => idx * dlag * VALLEY_LAG_DEBIAS,
        None => {
            let offset = parabolic_offset(nd[vi - 1], nd[vi], nd[vi + 1]);
            acf.lags[vi + 1] + offset * dlag
        }
    };
    if valley_lag <= 0.0 {
        return SpeedEstimate::not_found();
    }
    SpeedEstimate {
        v_hat: FIRST_J1_MAX / (wave_number * valley_lag),
        valley_lag,
        valley_prominence,
        peak_prominence,
        found: true,
    }
}

/// Re-estimates the derivative around `coarse_idx` (a lag-sample index into
/// `acf`) with a derivative-of-Gaussian filter whose width scales with the
/// coarse lag, then returns the refined minimum position in lag samples and
/// the derivative value there. `None` when the search range does not fit.
fn refine_valley(acf: &[f64], coarse_idx: usize, min_idx: usize) -> Option<(f64, f64)> {
    let n = acf.len();
    let sigma = (coarse_idx as f64 / 3.0).clamp(1.5, 60.0);
    let reach = (3.5 * sigma).ceil() as usize;
    let lo = ((0.55 * coarse_idx as f64).round() as usize).max(min_idx).max(1);
    let hi = ((1.55 * coarse_idx as f64).round() as usize).min(n - 2);
    if lo + 2 > hi {
        return None;
    }

    // Gaussian-weighted local linear fit: the slope estimate equals a
    // derivative-of-Gaussian filter on full support and stays unbiased for
    // locally linear signals when the window is clipped at either end.
    // Lag 0 carries the uncorrelated-noise spike (rho(0) = 1 regardless of
    // how little of the variance is motion); keep it out of the fit support.
    let deriv_at = |j: usize| -> f64 {
        let i_lo = j.saturating_sub(reach).max(1);
        let i_hi = (j + reach).min(n - 1);
        let (mut sw, mut swu, mut swuu, mut swa, mut swua) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in i_lo..=i_hi {
            let u = i as f64 - j as f64;
            let w = (-u * u / (2.0 * sigma * sigma)).exp();
            sw += w;
            swu += w * u;
            swuu += w * u * u;
            swa += w * acf[i];
            swua += w * u * acf[i];
        }
        let ubar = swu / sw;
        let denom = swuu - ubar * swu;
        if denom <= 0.0 {
            return 0.0;
        }
        (swua - ubar * swa) / denom
    };
    let d: Vec<f64> = (lo..=hi).map(deriv_at).collect();
    let mut best = 0usize;
    for (i, &v) in d.iter().enumerate() {
        if v < d[best] {
            best = i;
        }
    }
    let j = lo + best;
    let frac = if best > 0 && best + 1 < d.len() {
        parabolic_offset(d[best - 1], d[best], d[best + 1])
    } else {
        0.0
    };
    Some((j as f64 + frac, d[best]))
}

/// First local maximum strictly after `start`; falls back to the maximum of
/// the remaining tail when the curve never turns down again.
fn next_local_max(x: &[f64], start: usize) -> (Option<usize>, f64) {
    let n = x.len();
    for i in start + 1..n - 1 {
        if x[i] > x[i - 1] && x[i] > x[i + 1] {
            return (Some(i), x[i]);
        }
    }
    let tail_max = x[start..].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    (None, tail_max)
}

/// First local minimum strictly after `start`; falls back to the minimum of
/// the remaining tail.
fn next_local_min(x: &[f64], start: usize) -> (Option<usize>, f64) {
    let n = x.len();
    for i in start + 1..n - 1 {
        if x[i] < x[i - 1] && x[i] < x[i + 1] {
            return (Some(i), x[i]);
        }
    }
    let tail_min = x[start..].iter().fold(f64::INFINITY, |m, &v| m.min(v));
    (None, tail_min)
}

/// Vertex offset (in samples, clamped to +-0.5) of the parabola through three
/// equally spaced points.
fn parabolic_offset(y0: f64, y1: f64, y2: f64) -> f64 {
    let denom = y0 - 2.0 * y1 + y2;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
}

fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    if half == 0 {
        return x.to_vec();
    }
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let sum: f64 = x[lo..=hi].iter().sum();
        out.push(sum / (hi - lo + 1) as f64);
    }
    out
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}
