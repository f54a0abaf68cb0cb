//! The four-state proximity machine: Faraway, Approaching, Near, Leaving.
//!
//! The machine fuses the proximity-feature trend with gait presence.
//! Detection events are emitted only on Near entry (Approaching -> Near) and
//! Near exit (Leaving -> Faraway), so emitted events always alternate. All
//! guard conditions must hold for `debounce` consecutive samples before a
//! transition fires; event timestamps use the first sample of the debounced
//! run, the earliest evidence of the transition.
//!
//! The defining robustness property: once Near, the machine stays Near under
//! low proximity feature with no gait, so a person going quasi-static (sitting,
//! reading) in the proximate area is not lost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSample;

#[derive(Debug, Error)]
pub enum FsmError {
    #[error("out-of-order sample: t={t} after t={last}")]
    OutOfOrder { t: f64, last: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// The four phases of the proximity machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateKind {
    Faraway,
    Approaching,
    Near,
    Leaving,
}

impl std::fmt::Display for StateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StateKind::Faraway => "Faraway",
            StateKind::Approaching => "Approaching",
            StateKind::Near => "Near",
            StateKind::Leaving => "Leaving",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    NearEntered,
    NearExited,
}

/// A Near entry or exit, stamped with the first sample of the debounced run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub kind: EventKind,
    pub t: f64,
}

/// Thresholds and timing of the machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsmConfig {
    /// Proximity-feature threshold for entering Near.
    pub theta_near: f64,
    /// Proximity-feature threshold for confirming departure; must sit below
    /// `theta_near` (hysteresis).
    pub theta_far: f64,
    /// Gait-score threshold certifying walking motion.
    pub theta_gait: f64,
    /// Proximity-slope threshold (1/seconds) for approach/leave trends.
    pub theta_slope: f64,
    /// Consecutive samples a condition must hold before a transition fires.
    pub debounce: u32,
    /// Seconds of absent gait and low proximity after which Approaching
    /// falls back to Faraway.
    pub timeout_approach: f64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        FsmConfig {
            theta_near: 0.65,
            theta_far: 0.45,
            theta_gait: 0.05,
            theta_slope: 0.02,
            debounce: 5,
            timeout_approach: 10.0,
        }
    }
}

impl FsmConfig {
    pub fn validate(&self) -> Result<(), FsmError> {
        let mut problems = Vec::new();
        if !(self.theta_far < self.theta_near) {
            problems.push(format!(
                "theta_far ({}) must be < theta_near ({})",
                self.theta_far, self.theta_near
            ));
        }
        if self.debounce < 1 {
            problems.push("debounce must be >= 1".into());
        }
        if !(self.timeout_approach > 0.0) {
            problems.push("timeout_approach must be positive".into());
        }
        for (name, v) in [
            ("theta_near", self.theta_near),
            ("theta_far", self.theta_far),
            ("theta_gait", self.theta_gait),
            ("theta_slope", self.theta_slope),
            ("timeout_approach", self.timeout_approach),
        ] {
            if !v.is_finite() {
                problems.push(format!("{name} must be finite"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(FsmError::InvalidConfig(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Run {
    target: StateKind,
    count: u32,
    first_t: f64,
}

/// Full machine state: the active phase plus debounce bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityState {
    kind: StateKind,
    /// Samples consumed in the current phase; resets on every transition.
    dwell: u64,
    run: Option<Run>,
    /// Start of the sustained low-gait/low-proximity stretch while Approaching.
    low_since: Option<f64>,
    last_t: Option<f64>,
}

impl ProximityState {
    pub fn new() -> Self {
        ProximityState {
            kind: StateKind::Faraway,
            dwell: 0,
            run: None,
            low_since: None,
            last_t: None,
        }
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn dwell(&self) -> u64 {
        self.dwell
    }

    fn transition(&mut self, to: StateKind) {
        self.kind = to;
        self.dwell = 0;
        self.run = None;
        self.low_since = None;
    }

    /// Advances the debounce run toward `target`; returns the run start time
    /// once the condition has held for `debounce` consecutive samples.
    fn advance(&mut self, target: StateKind, cond: bool, t: f64, debounce: u32) -> Option<f64> {
        if !cond {
            if self.run.map_or(false, |r| r.target == target) {
                self.run = None;
            }
            return None;
        }
        let run = match self.run {
            Some(r) if r.target == target => Run { count: r.count + 1, ..r },
            _ => Run { target, count: 1, first_t: t },
        };
        if run.count >= debounce {
            Some(run.first_t)
        } else {
            self.run = Some(run);
            None
        }
    }
}

impl Default for ProximityState {
    fn default() -> Self {
        Self::new()
    }
}

/// Feeds one feature sample through the machine. Returns the event emitted by
/// the step, if any. Samples must be time-ordered.
pub fn step(
    state: &mut ProximityState,
    s: &FeatureSample,
    cfg: &FsmConfig,
) -> Result<Option<DetectionEvent>, FsmError> {
    if let Some(last) = state.last_t {
        if s.t < last {
            return Err(FsmError::OutOfOrder { t: s.t, last });
        }
    }
    state.last_t = Some(s.t);
    state.dwell += 1;

    let event = match state.kind {
        StateKind::Faraway => {
            // rising proximity together with gait
            let cond = s.fs > cfg.theta_slope && s.fg > cfg.theta_gait;
            if state.advance(StateKind::Approaching, cond, s.t, cfg.debounce).is_some() {
                state.transition(StateKind::Approaching);
            }
            None
        }
        StateKind::Approaching => {
            let near_cond = s.fp >= cfg.theta_near;
            if let Some(first_t) = state.advance(StateKind::Near, near_cond, s.t, cfg.debounce) {
                state.transition(StateKind::Near);
                Some(DetectionEvent { kind: EventKind::NearEntered, t: first_t })
            } else {
                // absent gait and low proximity, sustained, abandons the approach
                let low = s.fg <= cfg.theta_gait && s.fp < cfg.theta_near;
                if low {
                    let since = *state.low_since.get_or_insert(s.t);
                    if s.t - since >= cfg.timeout_approach {
                        state.transition(StateKind::Faraway);
                    }
                } else {
                    state.low_since = None;
                }
                None
            }
        }
        StateKind::Near => {
            // falling proximity together with gait; anything less keeps Near
            let cond = s.fs < -cfg.theta_slope && s.fg > cfg.theta_gait;
            if state.advance(StateKind::Leaving, cond, s.t, cfg.debounce).is_some() {
                state.transition(StateKind::Leaving);
            }
            None
        }
        StateKind::Leaving => {
            let exit_cond = s.fp <= cfg.theta_far;
            let abort_cond = s.fp >= cfg.theta_near;
            if let Some(first_t) = state.advance(StateKind::Faraway, exit_cond, s.t, cfg.debounce)
            {
                state.transition(StateKind::Faraway);
                Some(DetectionEvent { kind: EventKind::NearExited, t: first_t })
            } else if state.advance(StateKind::Near, abort_cond, s.t, cfg.debounce).is_some() {
                // departure aborted: proximity recovered
                state.transition(StateKind::Near);
                None
            } else {
                None
            }
        }
    };
    Ok(event)
}

/// Folds [`step`] over an ordered stream, starting Faraway.
pub fn run_detector(
    samples: impl IntoIterator<Item = FeatureSample>,
    cfg: &FsmConfig,
) -> Result<Vec<DetectionEvent>, FsmError> {
    cfg.validate()?;
    let mut state = ProximityState::new();
    let mut events = Vec::new();
    for s in samples {
        if let Some(e) = step(&mut state, &s, cfg)? {
            events.push(e);
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, fp: f64, fs: f64, fg: f64) -> FeatureSample {
        FeatureSample { t, fp, fs, v_hat: 1.3, c: 1.0, fg }
    }

    fn quiet(t: f64) -> FeatureSample {
        sample(t, 0.0, 0.0, 0.0)
    }

    #[test]
    fn faraway_stays_on_zero_features() {
        let cfg = FsmConfig::default();
        let mut state = ProximityState::new();
        for i in 0..2000 {
            let e = step(&mut state, &quiet(i as f64 * 0.1), &cfg).unwrap();
            assert!(e.is_none());
            assert_eq!(state.kind(), StateKind::Faraway);
        }
    }

    #[test]
    fn near_is_sticky_without_gait() {
        let cfg = FsmConfig::default();
        let mut state = ProximityState::new();
        let mut t = 0.0;
        // walk up: approach then cross theta_near
        for _ in 0..20 {
            step(&mut state, &sample(t, 0.3, 0.1, 0.5), &cfg).unwrap();
            t += 0.1;
        }
        assert_eq!(state.kind(), StateKind::Approaching);
        for _ in 0..10 {
            step(&mut state, &sample(t, 0.9, 0.1, 0.5), &cfg).unwrap();
            t += 0.1;
        }
        assert_eq!(state.kind(), StateKind::Near);
        // 60 s of low fp with no gait: remains Near, no event
        for _ in 0..600 {
            let e = step(&mut state, &sample(t, 0.1, -0.2, 0.0), &cfg).unwrap();
            assert!(e.is_none());
            assert_eq!(state.kind(), StateKind::Near);
            t += 0.1;
        }
    }

    #[test]
    fn full_cycle_emits_one_pair_at_run_starts() {
        let cfg = FsmConfig::default();
        let mut stream = Vec::new();
        let mut t = 0.0;
        let mut push = |v: FeatureSample, t: &mut f64| {
            stream.push(v);
            *t += 0.1;
        };
        // 20 samples of gait + rising fp below theta_near
        for _ in 0..20 {
            push(sample(t, 0.4, 0.1, 0.5), &mut t);
        }
        // fp crosses theta_near (first crossing at t = 2.0)
        for _ in 0..20 {
            push(sample(t, 0.8, 0.1, 0.5), &mut t);
        }
        // gait + falling fp
        for _ in 0..10 {
            push(sample(t, 0.6, -0.1, 0.5), &mut t);
        }
        // fp below theta_far (first crossing at t = 5.0)
        for _ in 0..20 {
            push(sample(t, 0.2, -0.1, 0.5), &mut t);
        }
        let events = run_detector(stream, &cfg).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].kind, EventKind::NearEntered);
        assert!((events[0].t - 2.0).abs() < 1e-9, "t = {}", events[0].t);
        assert_eq!(events[1].kind, EventKind::NearExited);
        assert!((events[1].t - 5.0).abs() < 1e-9, "t = {}", events[1].t);
    }

    #[test]
    fn debounce_broken_run_does_not_fire() {
        let cfg = FsmConfig::default();
        let mut state = ProximityState::new();
        let mut t = 0.0;
        // 4 samples of approach condition, then a break, repeatedly
        for _ in 0..50 {
            for _ in 0..4 {
                step(&mut state, &sample(t, 0.3, 0.1, 0.5), &cfg).unwrap();
                t += 0.1;
            }
            step(&mut state, &quiet(t), &cfg).unwrap();
            t += 0.1;
        }
        assert_eq!(state.kind(), StateKind::Faraway);
    }

    #[test]
    fn debounce_exact_boundary_fires() {
        let cfg = FsmConfig { debounce: 5, ..FsmConfig::default() };
        let mut state = ProximityState::new();
        let mut t = 0.0;
        for _ in 0..5 {
            step(&mut state, &sample(t, 0.3, 0.1, 0.5), &cfg).unwrap();
            t += 0.1;
        }
        assert_eq!(state.kind(), StateKind::Approaching);
    }

    #[test]
    fn out_of_order_rejected() {
        let cfg = FsmConfig::default();
        let mut state = ProximityState::new();
        step(&mut state, &quiet(1.0), &cfg).unwrap();
        let err = step(&mut state, &quiet(0.5), &cfg);
        assert!(matches!(err, Err(FsmError::OutOfOrder { .. })));
    }

    #[test]
    fn config_validation() {
        let bad = FsmConfig { theta_near: 0.4, theta_far: 0.5, ..FsmConfig::default() };
        assert!(bad.validate().is_err());
        assert!(FsmConfig::default().validate().is_ok());
    }
}
