//! Pipeline configuration: one JSON document with embedded defaults.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::FsmConfig;

#[derive(Debug, Error)]
#[error("invalid config:\n{}", .0.join("\n"))]
pub struct ConfigError(pub Vec<String>);

/// Hampel-filter parameters, applied to the downsampled proximity stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HampelConfig {
    /// Centered window length in samples; odd, >= 3.
    pub window: usize,
    /// Outlier threshold in robust standard deviations.
    pub n_sigmas: f64,
}

impl Default for HampelConfig {
    fn default() -> Self {
        HampelConfig { window: 31, n_sigmas: 3.0 }
    }
}

/// Windowing of the full-rate autocorrelation branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcfConfig {
    /// Window length, seconds. Short enough that the gait-cycle ripple of
    /// the speed estimate survives the windowing.
    pub window_s: f64,
    /// Hop between windows, seconds.
    pub hop_s: f64,
    /// Longest lag evaluated, seconds; must not exceed half the window.
    pub max_lag_s: f64,
}

impl Default for AcfConfig {
    fn default() -> Self {
        AcfConfig { window_s: 0.4, hop_s: 0.1, max_lag_s: 0.2 }
    }
}

/// Everything the detection pipeline needs to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// CSI sounding rate, Hz.
    pub sample_rate: f64,
    /// Rate of the downsampled proximity branch, Hz; must divide the
    /// sounding rate.
    pub downsample_to: f64,
    /// Carrier center frequency, Hz.
    pub center_freq: f64,
    /// Channel bandwidth, Hz.
    pub bandwidth: f64,
    pub hampel: HampelConfig,
    pub acf: AcfConfig,
    /// Trailing window of the adjacent-subcarrier correlation, seconds.
    pub fp_window_s: f64,
    /// Trailing window of the proximity-slope fit, seconds.
    pub slope_window_s: f64,
    /// Trailing window of the gait-cycle-rate estimate, seconds.
    pub gait_window_s: f64,
    pub fsm: FsmConfig,
    /// Radius of the proximate area, meters.
    pub proximate_radius: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sample_rate: 1500.0,
            downsample_to: 30.0,
            center_freq: 5.18e9,
            bandwidth: 40e6,
            hampel: HampelConfig::default(),
            acf: AcfConfig::default(),
            fp_window_s: 1.5,
            slope_window_s: 1.5,
            gait_window_s: 2.0,
            fsm: FsmConfig::default(),
            proximate_radius: 1.5,
        }
    }
}

impl PipelineConfig {
    /// Integer decimation factor between the sounding and proximity rates.
    pub fn downsample_factor(&self) -> usize {
        (self.sample_rate / self.downsample_to).round() as usize
    }

    /// Checks every invariant; returns the full list of violations.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("sample_rate", self.sample_rate),
            ("downsample_to", self.downsample_to),
            ("center_freq", self.center_freq),
            ("bandwidth", self.bandwidth),
            ("fp_window_s", self.fp_window_s),
            ("slope_window_s", self.slope_window_s),
            ("gait_window_s", self.gait_window_s),
            ("proximate_radius", self.proximate_radius),
            ("acf.window_s", self.acf.window_s),
            ("acf.hop_s", self.acf.hop_s),
            ("acf.max_lag_s", self.acf.max_lag_s),
            ("hampel.n_sigmas", self.hampel.n_sigmas),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                problems.push(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let ratio = self.sample_rate / self.downsample_to;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            problems.push(format!(
                "downsample_to ({}) must divide sample_rate ({})",
                self.downsample_to, self.sample_rate
            ));
        }
        if self.hampel.window < 3 || self.hampel.window % 2 == 0 {
            problems.push(format!(
                "hampel.window must be odd and >= 3, got {}",
                self.hampel.window
            ));
        }
        if self.acf.max_lag_s > self.acf.window_s / 2.0 + 1e-12 {
            problems.push(format!(
                "acf.max_lag_s ({}) must not exceed half the window ({})",
                self.acf.max_lag_s, self.acf.window_s
            ));
        }
        if let Err(e) = self.fsm.validate() {
            let msg = e.to_string();
            problems.push(msg.strip_prefix("invalid config: ").unwrap_or(&msg).to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(problems))
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| ConfigError(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        PipelineConfig::default().validate().unwrap();
        assert_eq!(PipelineConfig::default().downsample_factor(), 50);
    }

    #[test]
    fn json_roundtrip_semantically_identical() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_json_pretty();
        let back = PipelineConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"sample_rate": 3000.0}"#).unwrap();
        assert_eq!(cfg.sample_rate, 3000.0);
        assert_eq!(cfg.downsample_to, 30.0);
    }

    #[test]
    fn violations_are_listed() {
        let mut cfg = PipelineConfig::default();
        cfg.downsample_to = 29.0;
        cfg.hampel.window = 4;
        cfg.fsm.theta_far = 0.9;
        let err = cfg.validate().unwrap_err();
        assert!(err.0.len() >= 3, "{err}");
    }
}
