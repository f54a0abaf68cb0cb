//! The streaming detection pipeline.
//!
//! One pass over full-rate CSI feeds two branches. The gait branch windows
//! the normalized power response at the sounding rate, combines per-subcarrier
//! autocorrelations and reads off walking speed per hop. The proximity branch
//! block-mean downsamples to the monitoring rate, Hampel-filters the result
//! and computes the adjacent-subcarrier correlation over a trailing window.
//! A fusion stage aligns both branches by window-end timestamps
//! (nearest-earlier) at the feature cadence and folds the fused samples
//! through the proximity state machine.
//!
//! Memory is O(window): rings for the two branches plus bounded histories.

use std::collections::VecDeque;

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::csi::{self, CsiError, CsiFrame, PowerFrame, PowerSeries};
use crate::features::{self, FeatureSample, GaitParams};
use crate::fsm::{self, DetectionEvent, FsmError, ProximityState, StateKind};
use crate::spectral::{self, AcfResult, SpectralError, SpeedEstimate};

/// Target cadence of fused feature samples, Hz.
pub const FEATURE_RATE: f64 = 10.0;

/// Samples of trailing mean applied to the fused gait score. The per-window
/// swing asymmetry flickers around zero under realization noise even during
/// steady walking; a half-second average turns it into evidence the state
/// machine's conjunctive debounce can actually accumulate.
const GAIT_SCORE_SMOOTH: usize = 5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Csi(#[from] CsiError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Fsm(#[from] FsmError),
    #[error("frame width {got} does not match stream width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("out-of-order frame: t={t} after t={last}")]
    OutOfOrder { t: f64, last: f64 },
}

/// Everything one `push` produced.
#[derive(Debug, Default)]
pub struct PushOutput {
    /// Fused feature samples with the machine state after each step.
    pub features: Vec<(FeatureSample, StateKind)>,
    pub events: Vec<DetectionEvent>,
    /// Per-window ACF results; populated only when ACF collection is enabled.
    pub acfs: Vec<AcfResult>,
}

impl PushOutput {
    fn absorb(&mut self, mut other: PushOutput) {
        self.features.append(&mut other.features);
        self.events.append(&mut other.events);
        self.acfs.append(&mut other.acfs);
    }
}

// ---------------------------------------------------------------------------

/// Plain decimator: keeps every `factor`-th frame.
///
/// The proximity branch must not average blocks before the rate change: the
/// per-sample receiver-noise floor is exactly the decorrelating term that
/// pulls the adjacent-subcarrier correlation down for far motion. Averaging
/// 50 samples buries that floor and flattens the proximity feature over
/// distance, while the aliasing decimation admits is irrelevant to a
/// correlation-over-subcarriers statistic.
struct Decimator {
    factor: usize,
    count: usize,
}

impl Decimator {
    fn new(factor: usize) -> Self {
        Decimator { factor, count: 0 }
    }

    fn push(&mut self, frame: &PowerFrame) -> Option<PowerFrame> {
        let take = self.count == 0;
        self.count = (self.count + 1) % self.factor;
        if take {
            Some(frame.clone())
        } else {
            None
        }
    }
}

/// Streaming centered Hampel filter, equal to the batch filter sample for
/// sample: emission starts once a full window is buffered, edge windows are
/// truncated, and a stream shorter than one window is passed through
/// unchanged.
struct StreamingHampel {
    window: usize,
    half: usize,
    n_sigmas: f64,
    buf: VecDeque<PowerFrame>,
    front_idx: usize,
    pushed: usize,
    emitted: usize,
}

impl StreamingHampel {
    fn new(window: usize, n_sigmas: f64) -> Self {
        StreamingHampel {
            window,
            half: window / 2,
            n_sigmas,
            buf: VecDeque::new(),
            front_idx: 0,
            pushed: 0,
            emitted: 0,
        }
    }

    fn filter_at(&self, idx: usize) -> PowerFrame {
        let lo = idx.saturating_sub(self.half);
        let hi = (idx + self.half).min(self.pushed - 1);
        let center = &self.buf[idx - self.front_idx];
        let mut out = center.clone();
        let mut scratch = Vec::with_capacity(hi - lo + 1);
        for sc in 0..out.g.len() {
            scratch.clear();
            for j in lo..=hi {
                scratch.push(self.buf[j - self.front_idx].g[sc]);
            }
            let med = csi::median_in_place(&mut scratch);
            for v in scratch.iter_mut() {
                *v = (*v - med).abs();
            }
            let mad = csi::median_in_place(&mut scratch);
            if (center.g[sc] - med).abs() > self.n_sigmas * csi::MAD_GAUSSIAN_SCALE * mad {
                out.g[sc] = med;
            }
        }
        out
    }

    fn drain_ready(&mut self, at_end: bool) -> Vec<PowerFrame> {
        let mut out = Vec::new();
        if self.pushed < self.window {
            if at_end {
                // shorter than one window: identity, matching the batch filter
                out.extend(self.buf.drain(..));
                self.emitted = self.pushed;
            }
            return out;
        }
        while self.emitted < self.pushed
            && (at_end || self.emitted + self.half < self.pushed)
        {
            out.push(self.filter_at(self.emitted));
            self.emitted += 1;
            while self.front_idx + self.half < self.emitted {
                self.buf.pop_front();
                self.front_idx += 1;
            }
        }
        out
    }

    fn push(&mut self, frame: PowerFrame) -> Vec<PowerFrame> {
        self.buf.push_back(frame);
        self.pushed += 1;
        self.drain_ready(false)
    }

    fn finish(&mut self) -> Vec<PowerFrame> {
        self.drain_ready(true)
    }
}

// ---------------------------------------------------------------------------

/// The streaming detector. Feed frames with [`Detector::push_csi`] /
/// [`Detector::push_power`], then [`Detector::finish`].
pub struct Detector {
    cfg: PipelineConfig,
    gait_params: GaitParams,
    wave_number: f64,
    collect_acf: bool,

    width: Option<usize>,
    last_t: Option<f64>,
    frames_in: u64,
    degenerate_frames: u64,

    // gait branch
    acf_ring: VecDeque<PowerFrame>,
    acf_window_len: usize,
    acf_hop_len: usize,
    since_acf: usize,
    speeds: VecDeque<(f64, f64)>,
    estimates: VecDeque<(f64, SpeedEstimate)>,

    // proximity branch
    decimator: Decimator,
    hampel: StreamingHampel,
    fp_ring: VecDeque<PowerFrame>,
    fp_window_len: usize,
    cadence_div: usize,
    low_rate_count: usize,
    fp_history: VecDeque<(f64, f64)>,
    fg_recent: VecDeque<f64>,

    state: ProximityState,
}

impl Detector {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate().map_err(|e| {
            PipelineError::Csi(CsiError::InvalidParameter(e.to_string()))
        })?;
        let acf_window_len = (cfg.acf.window_s * cfg.sample_rate).round() as usize;
        let acf_hop_len = ((cfg.acf.hop_s * cfg.sample_rate).round() as usize).max(1);
        let fp_window_len =
            ((cfg.fp_window_s * cfg.downsample_to).round() as usize).max(features::MIN_FP_SAMPLES);
        let cadence_div = ((cfg.downsample_to / FEATURE_RATE).round() as usize).max(1);
        Ok(Detector {
            wave_number: spectral::wave_number(cfg.center_freq),
            gait_params: GaitParams::default(),
            collect_acf: false,
            width: None,
            last_t: None,
            frames_in: 0,
            degenerate_frames: 0,
            acf_ring: VecDeque::with_capacity(acf_window_len + 1),
            acf_window_len,
            acf_hop_len,
            since_acf: 0,
            speeds: VecDeque::new(),
            estimates: VecDeque::new(),
            decimator: Decimator::new(cfg.downsample_factor()),
            hampel: StreamingHampel::new(cfg.hampel.window, cfg.hampel.n_sigmas),
            fp_ring: VecDeque::with_capacity(fp_window_len + 1),
            fp_window_len,
            cadence_div,
            low_rate_count: 0,
            fp_history: VecDeque::new(),
            fg_recent: VecDeque::with_capacity(GAIT_SCORE_SMOOTH),
            state: ProximityState::new(),
            cfg,
        })
    }

    /// Enables per-window ACF collection in the push outputs (debug dumps).
    pub fn collect_acf(&mut self, enable: bool) {
        self.collect_acf = enable;
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn state(&self) -> StateKind {
        self.state.kind()
    }

    pub fn frames_in(&self) -> u64 {
        self.frames_in
    }

    /// Frames dropped because their power response was degenerate.
    pub fn degenerate_frames(&self) -> u64 {
        self.degenerate_frames
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.last_t
    }

    pub fn push_csi(&mut self, frame: &CsiFrame) -> Result<PushOutput, PipelineError> {
        let power = csi::power_response(frame)?;
        self.push_power(power)
    }

    pub fn push_power(&mut self, frame: PowerFrame) -> Result<PushOutput, PipelineError> {
        let width = *self.width.get_or_insert(frame.g.len());
        if frame.g.len() != width {
            return Err(PipelineError::WidthMismatch { expected: width, got: frame.g.len() });
        }
        if let Some(last) = self.last_t {
            if frame.timestamp < last {
                return Err(PipelineError::OutOfOrder { t: frame.timestamp, last });
            }
        }
        self.last_t = Some(frame.timestamp);
        self.frames_in += 1;

        let normalized = match csi::normalize_frame(&frame) {
            Ok(f) => f,
            Err(CsiError::DegenerateFrame { .. }) => {
                self.degenerate_frames += 1;
                return Ok(PushOutput::default());
            }
            Err(e) => return Err(e.into()),
        };

        let mut out = PushOutput::default();
        self.push_gait_branch(&normalized, &mut out)?;

        if let Some(low) = self.decimator.push(&normalized) {
            for filtered in self.hampel.push(low) {
                self.push_proximity(filtered, &mut out)?;
            }
        }
        Ok(out)
    }

    /// Flushes the Hampel lookahead and processes the remaining tail.
    pub fn finish(&mut self) -> Result<PushOutput, PipelineError> {
        let mut out = PushOutput::default();
        for filtered in self.hampel.finish() {
            self.push_proximity(filtered, &mut out)?;
        }
        Ok(out)
    }

    fn push_gait_branch(
        &mut self,
        frame: &PowerFrame,
        out: &mut PushOutput,
    ) -> Result<(), PipelineError> {
        self.acf_ring.push_back(frame.clone());
        if self.acf_ring.len() > self.acf_window_len {
            self.acf_ring.pop_front();
        }
        if self.acf_ring.len() < self.acf_window_len {
            return Ok(());
        }
        self.since_acf += 1;
        if self.since_acf < self.acf_hop_len && self.speeds.back().is_some() {
            return Ok(());
        }
        self.since_acf = 0;

        let window = PowerSeries {
            sample_rate: self.cfg.sample_rate,
            frames: self.acf_ring.iter().cloned().collect(),
            num_subcarriers: frame.g.len(),
        };
        let window_end = window.frames.last().expect("nonempty window").timestamp;
        let matrix = spectral::acf_per_subcarrier(&window, self.cfg.acf.max_lag_s)?;
        let combined = spectral::combine_acf(&matrix, window_end);
        let est = spectral::estimate_speed(&combined, self.wave_number);
        if self.collect_acf {
            out.acfs.push(combined);
        }
        self.speeds.push_back((window_end, est.v_hat));
        let keep_from = window_end - (2.0 * self.cfg.gait_window_s + 1.0);
        while self.speeds.front().map_or(false, |&(t, _)| t < keep_from) {
            self.speeds.pop_front();
        }
        self.estimates.push_back((window_end, est));
        let est_keep = window_end - 3.0 * self.cfg.acf.window_s;
        while self.estimates.len() > 1
            && self.estimates.front().map_or(false, |&(t, _)| t < est_keep)
        {
            self.estimates.pop_front();
        }
        Ok(())
    }

    fn push_proximity(
        &mut self,
        frame: PowerFrame,
        out: &mut PushOutput,
    ) -> Result<(), PipelineError> {
        self.fp_ring.push_back(frame);
        if self.fp_ring.len() > self.fp_window_len {
            self.fp_ring.pop_front();
        }
        self.low_rate_count += 1;
        if self.fp_ring.len() < self.fp_window_len || self.low_rate_count % self.cadence_div != 0 {
            return Ok(());
        }

        let window = PowerSeries {
            sample_rate: self.cfg.downsample_to,
            frames: self.fp_ring.iter().cloned().collect(),
            num_subcarriers: self.fp_ring.back().map_or(0, |f| f.g.len()),
        };
        let t = window.frames.last().expect("nonempty fp window").timestamp;
        let fp = match features::proximity_feature(&window) {
            Ok(v) => v,
            // single-subcarrier streams carry no adjacent-pair information
            Err(features::FeatureError::TooFewSubcarriers(_)) => 0.0,
            Err(features::FeatureError::TooFewSamples { .. }) => return Ok(()),
        };

        self.fp_history.push_back((t, fp));
        let keep_from = t - (self.cfg.slope_window_s + 1.0);
        while self.fp_history.front().map_or(false, |&(ht, _)| ht < keep_from) {
            self.fp_history.pop_front();
        }
        let hist: Vec<(f64, f64)> = self.fp_history.iter().copied().collect();
        let fs = features::slope(&hist, self.cfg.slope_window_s).unwrap_or(0.0);

        let est = self
            .estimates
            .iter()
            .rev()
            .find(|&&(we, _)| we <= t)
            .map(|&(_, e)| e)
            .unwrap_or_default();

        let speed_hist: Vec<(f64, f64)> =
            self.speeds.iter().copied().filter(|&(st, _)| st <= t).collect();
        let c = features::gait_cycle_rate(&speed_hist, self.cfg.gait_window_s).unwrap_or(0.0);

        let fg_raw = features::gait_score(&est, c, &self.gait_params);
        if self.fg_recent.len() == GAIT_SCORE_SMOOTH {
            self.fg_recent.pop_front();
        }
        self.fg_recent.push_back(fg_raw);
        let fg = self.fg_recent.iter().sum::<f64>() / self.fg_recent.len() as f64;
        let sample = FeatureSample { t, fp, fs, v_hat: est.v_hat, c, fg };
        if let Some(event) = fsm::step(&mut self.state, &sample, &self.cfg.fsm)? {
            out.events.push(event);
        }
        out.features.push((sample, self.state.kind()));
        Ok(())
    }
}

/// Runs a whole frame stream through a fresh detector and collects all
/// outputs. Convenience wrapper over the streaming interface.
pub fn detect_stream(
    cfg: PipelineConfig,
    frames: impl Iterator<Item = CsiFrame>,
) -> Result<(PushOutput, Option<f64>), PipelineError> {
    let mut detector = Detector::new(cfg)?;
    let mut all = PushOutput::default();
    for frame in frames {
        all.absorb(detector.push_csi(&frame)?);
    }
    all.absorb(detector.finish()?);
    Ok((all, detector.last_timestamp()))
}
