//! Device-free proximity detection from WiFi channel state information.
//!
//! A walking person approaching a WiFi device raises the correlation between
//! the power responses of adjacent subcarriers; their gait leaves a Bessel
//! signature in the time autocorrelation of the same power responses. This
//! crate extracts both, fuses them into per-step feature samples and runs a
//! four-state machine (Faraway, Approaching, Near, Leaving) that emits enter
//! and exit events for a proximate area around the device.
//!
//! The crate also ships a physics-grounded multipath CSI simulator
//! ([`synth`]) used as ground truth for end-to-end testing, and the detection
//! metrics ([`eval`]) to score event streams against that truth.

pub mod config;
pub mod csi;
pub mod eval;
pub mod features;
pub mod fsm;
pub mod io;
pub mod pipeline;
pub mod spectral;
pub mod synth;

pub use config::PipelineConfig;
pub use csi::{CsiFrame, PowerFrame, PowerSeries};
pub use eval::EvalReport;
pub use features::{FeatureSample, GaitParams};
pub use fsm::{DetectionEvent, EventKind, FsmConfig, ProximityState, StateKind};
pub use pipeline::Detector;
pub use spectral::{AcfResult, SpeedEstimate};
pub use synth::{GroundTruthEvent, Scene, Trajectory};
