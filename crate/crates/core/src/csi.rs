//! CSI / power-response domain types and the preprocessing chain:
//! power response, per-frame normalization, Hampel outlier removal and
//! block-mean downsampling.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

/// Scaling factor turning a median absolute deviation into a consistent
/// estimate of the standard deviation under Gaussian noise.
pub const MAD_GAUSSIAN_SCALE: f64 = 1.4826;

/// Relative frame-spacing deviation above which a stream is considered jittery.
pub const JITTER_TOLERANCE: f64 = 0.10;

#[derive(Debug, Error)]
pub enum CsiError {
    #[error("non-finite value in frame at t={timestamp}s (subcarrier {index})")]
    NonFinite { timestamp: f64, index: usize },
    #[error("degenerate frame at t={timestamp}s: all-zero power")]
    DegenerateFrame { timestamp: f64 },
    #[error("frame width {got} does not match series width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("subcarrier frequencies must be strictly increasing")]
    FrequenciesNotIncreasing,
    #[error("csi length {csi} does not match frequency list length {freqs}")]
    LengthMismatch { csi: usize, freqs: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("negative power at t={timestamp}s (subcarrier {index})")]
    NegativePower { timestamp: f64, index: usize },
}

/// One timestamped vector of complex channel gains, one per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    /// Capture time in seconds.
    pub timestamp: f64,
    /// Complex channel gain per subcarrier.
    pub csi: Vec<Complex64>,
    /// Subcarrier center frequencies in Hz, strictly increasing.
    pub subcarrier_freqs: Arc<[f64]>,
}

impl CsiFrame {
    pub fn new(
        timestamp: f64,
        csi: Vec<Complex64>,
        subcarrier_freqs: Arc<[f64]>,
    ) -> Result<Self, CsiError> {
        if csi.len() != subcarrier_freqs.len() {
            return Err(CsiError::LengthMismatch {
                csi: csi.len(),
                freqs: subcarrier_freqs.len(),
            });
        }
        if !subcarrier_freqs.windows(2).all(|w| w[0] < w[1]) {
            return Err(CsiError::FrequenciesNotIncreasing);
        }
        if !timestamp.is_finite() {
            return Err(CsiError::NonFinite { timestamp, index: 0 });
        }
        for (i, c) in csi.iter().enumerate() {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(CsiError::NonFinite { timestamp, index: i });
            }
        }
        Ok(Self { timestamp, csi, subcarrier_freqs })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.csi.len()
    }
}

/// One timestamped vector of per-subcarrier power responses.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFrame {
    pub timestamp: f64,
    /// Non-negative power response per subcarrier.
    pub g: Vec<f64>,
}

impl PowerFrame {
    pub fn new(timestamp: f64, g: Vec<f64>) -> Result<Self, CsiError> {
        for (i, &v) in g.iter().enumerate() {
            if !v.is_finite() {
                return Err(CsiError::NonFinite { timestamp, index: i });
            }
            if v < 0.0 {
                return Err(CsiError::NegativePower { timestamp, index: i });
            }
        }
        Ok(Self { timestamp, g })
    }
}

/// A time x subcarrier matrix of power responses with sampling metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    pub sample_rate: f64,
    pub frames: Vec<PowerFrame>,
    pub num_subcarriers: usize,
}

impl PowerSeries {
    /// Builds a series, enforcing the equal-width contract.
    pub fn new(sample_rate: f64, frames: Vec<PowerFrame>) -> Result<Self, CsiError> {
        if sample_rate <= 0.0 || !sample_rate.is_finite() {
            return Err(CsiError::InvalidParameter(format!(
                "sample_rate must be positive, got {sample_rate}"
            )));
        }
        let num_subcarriers = frames.first().map_or(0, |f| f.g.len());
        for f in &frames {
            if f.g.len() != num_subcarriers {
                return Err(CsiError::WidthMismatch {
                    expected: num_subcarriers,
                    got: f.g.len(),
                });
            }
        }
        Ok(Self { sample_rate, frames, num_subcarriers })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    /// Number of frame gaps deviating from the nominal spacing by more than
    /// [`JITTER_TOLERANCE`]. Violations are tolerated downstream; callers may
    /// warn on a nonzero count.
    pub fn jitter_violations(&self) -> usize {
        let dt = 1.0 / self.sample_rate;
        self.frames
            .windows(2)
            .filter(|w| {
                let gap = w[1].timestamp - w[0].timestamp;
                (gap - dt).abs() > JITTER_TOLERANCE * dt
            })
            .count()
    }

    /// Copies one subcarrier's samples into a column vector.
    pub fn column(&self, subcarrier: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.g[subcarrier]).collect()
    }
}

/// Power response G = |H|^2, element-wise over a CSI frame.
pub fn power_response(frame: &CsiFrame) -> Result<PowerFrame, CsiError> {
    // CsiFrame construction already rejects non-finite values; keep the check
    // anyway so frames built by other means are still rejected here.
    let mut g = Vec::with_capacity(frame.csi.len());
    for (i, c) in frame.csi.iter().enumerate() {
        let v = c.norm_sqr();
        if !v.is_finite() {
            return Err(CsiError::NonFinite { timestamp: frame.timestamp, index: i });
        }
        g.push(v);
    }
    Ok(PowerFrame { timestamp: frame.timestamp, g })
}

/// Divides each subcarrier's power by the frame mean so the output frame has
/// mean one. Cancels any multiplicative receiver gain (AGC).
pub fn normalize_frame(frame: &PowerFrame) -> Result<PowerFrame, CsiError> {
    let n = frame.g.len();
    if n == 0 {
        return Err(CsiError::DegenerateFrame { timestamp: frame.timestamp });
    }
    let mean = frame.g.iter().sum::<f64>() / n as f64;
    if mean <= 0.0 {
        return Err(CsiError::DegenerateFrame { timestamp: frame.timestamp });
    }
    Ok(PowerFrame {
        timestamp: frame.timestamp,
        g: frame.g.iter().map(|&v| v / mean).collect(),
    })
}

/// Hampel filter over time, applied independently per subcarrier.
///
/// Any sample deviating from its centered-window median by more than
/// `n_sigmas * 1.4826 * MAD` is replaced by that median. Windows are truncated
/// at both edges of the series. With MAD = 0 the strict convention applies:
/// every sample not exactly equal to the window median is replaced.
pub fn hampel_filter(
    series: &PowerSeries,
    window: usize,
    n_sigmas: f64,
) -> Result<PowerSeries, CsiError> {
    if window < 3 || window % 2 == 0 {
        return Err(CsiError::InvalidParameter(format!(
            "hampel window must be odd and >= 3, got {window}"
        )));
    }
    if !(n_sigmas > 0.0) {
        return Err(CsiError::InvalidParameter(format!(
            "hampel n_sigmas must be positive, got {n_sigmas}"
        )));
    }
    let n = series.len();
    if window > n {
        log::warn!("hampel window {window} exceeds series length {n}; returning input unchanged");
        return Ok(series.clone());
    }

    let half = window / 2;
    let mut out = series.clone();
    let mut buf = Vec::with_capacity(window);
    for sc in 0..series.num_subcarriers {
        let col = series.column(sc);
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            buf.clear();
            buf.extend_from_slice(&col[lo..=hi]);
            let med = median_in_place(&mut buf);
            for v in buf.iter_mut() {
                *v = (*v - med).abs();
            }
            let mad = median_in_place(&mut buf);
            if (col[i] - med).abs() > n_sigmas * MAD_GAUSSIAN_SCALE * mad {
                out.frames[i].g[sc] = med;
            }
        }
    }
    Ok(out)
}

/// Block-mean decimation: each output frame is the mean of `factor`
/// consecutive input frames (values and timestamps alike); a trailing partial
/// block is dropped. The output rate is `sample_rate / factor`.
pub fn downsample(series: &PowerSeries, factor: usize) -> Result<PowerSeries, CsiError> {
    if factor == 0 {
        return Err(CsiError::InvalidParameter("downsample factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(series.clone());
    }
    let width = series.num_subcarriers;
    let mut frames = Vec::with_capacity(series.len() / factor);
    for block in series.frames.chunks_exact(factor) {
        let mut g = vec![0.0; width];
        let mut ts = 0.0;
        for f in block {
            ts += f.timestamp;
            for (acc, &v) in g.iter_mut().zip(&f.g) {
                *acc += v;
            }
        }
        let inv = 1.0 / factor as f64;
        for acc in g.iter_mut() {
            *acc *= inv;
        }
        frames.push(PowerFrame { timestamp: ts * inv, g });
    }
    Ok(PowerSeries {
        sample_rate: series.sample_rate / factor as f64,
        frames,
        num_subcarriers: width,
    })
}

/// Median of a scratch buffer; reorders the buffer.
pub(crate) fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    debug_assert!(n > 0);
    buf.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freqs(n: usize) -> Arc<[f64]> {
        (0..n).map(|i| 5.18e9 + i as f64 * 1e6).collect()
    }

    fn series_from(vals: &[f64], rate: f64) -> PowerSeries {
        let frames = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| PowerFrame { timestamp: i as f64 / rate, g: vec![v] })
            .collect();
        PowerSeries::new(rate, frames).unwrap()
    }

    #[test]
    fn power_response_modulus_squared() {
        let frame = CsiFrame::new(
            0.5,
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)],
            freqs(2),
        )
        .unwrap();
        let p = power_response(&frame).unwrap();
        assert_eq!(p.g, vec![1.0, 4.0]);
        assert_eq!(p.timestamp, 0.5);
    }

    #[test]
    fn power_response_zero_frame() {
        let frame = CsiFrame::new(0.0, vec![Complex64::new(0.0, 0.0); 4], freqs(4)).unwrap();
        let p = power_response(&frame).unwrap();
        assert!(p.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn csi_frame_rejects_non_finite() {
        let err = CsiFrame::new(0.0, vec![Complex64::new(f64::NAN, 0.0)], freqs(1));
        assert!(matches!(err, Err(CsiError::NonFinite { .. })));
    }

    #[test]
    fn normalize_simple() {
        let f = PowerFrame::new(0.0, vec![2.0, 4.0, 6.0]).unwrap();
        let out = normalize_frame(&f).unwrap();
        assert_eq!(out.g, vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn normalize_constant_frame() {
        let f = PowerFrame::new(0.0, vec![3.7; 5]).unwrap();
        let out = normalize_frame(&f).unwrap();
        for v in out.g {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_gain_invariant() {
        let f = PowerFrame::new(0.0, vec![1.0, 0.25, 3.0, 0.5]).unwrap();
        let scaled = PowerFrame::new(0.0, f.g.iter().map(|v| v * 7.3).collect()).unwrap();
        let a = normalize_frame(&f).unwrap();
        let b = normalize_frame(&scaled).unwrap();
        for (x, y) in a.g.iter().zip(&b.g) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_all_zero() {
        let f = PowerFrame::new(0.0, vec![0.0; 3]).unwrap();
        assert!(matches!(normalize_frame(&f), Err(CsiError::DegenerateFrame { .. })));
    }

    #[test]
    fn hampel_removes_single_spike() {
        let s = series_from(&[1.0, 1.0, 1.0, 100.0, 1.0, 1.0, 1.0], 30.0);
        let out = hampel_filter(&s, 7, 3.0).unwrap();
        for f in &out.frames {
            assert_eq!(f.g[0], 1.0);
        }
    }

    #[test]
    fn hampel_constant_unchanged() {
        let s = series_from(&[2.5; 20], 30.0);
        let out = hampel_filter(&s, 5, 3.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn hampel_window_larger_than_series_is_identity() {
        let s = series_from(&[1.0, 2.0, 3.0], 30.0);
        let out = hampel_filter(&s, 31, 3.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn hampel_rejects_even_window() {
        let s = series_from(&[1.0; 8], 30.0);
        assert!(hampel_filter(&s, 4, 3.0).is_err());
        assert!(hampel_filter(&s, 1, 3.0).is_err());
        assert!(hampel_filter(&s, 5, 0.0).is_err());
    }

    #[test]
    fn downsample_rate_and_length() {
        let s = series_from(&vec![1.0; 1500], 1500.0);
        let out = downsample(&s, 50).unwrap();
        assert_eq!(out.sample_rate, 30.0);
        assert_eq!(out.len(), 30);
    }

    #[test]
    fn downsample_identity() {
        let s = series_from(&[1.0, 2.0, 3.0, 4.0], 4.0);
        let out = downsample(&s, 1).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn downsample_constant() {
        let s = series_from(&[0.7; 12], 12.0);
        let out = downsample(&s, 4).unwrap();
        assert_eq!(out.len(), 3);
        for f in &out.frames {
            assert!((f.g[0] - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn downsample_zero_factor_rejected() {
        let s = series_from(&[1.0; 4], 4.0);
        assert!(matches!(downsample(&s, 0), Err(CsiError::InvalidParameter(_))));
    }

    #[test]
    fn jitter_detection() {
        let mut s = series_from(&[1.0; 10], 10.0);
        assert_eq!(s.jitter_violations(), 0);
        s.frames[5].timestamp += 0.05; // 50% off-nominal gap
        assert!(s.jitter_violations() > 0);
    }
}
