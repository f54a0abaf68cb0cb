//! Independent numerical oracles for integration tests. Nothing here shares
//! code with the implementation paths it checks.

#![allow(dead_code)]

use rand_distr::{Distribution, StandardNormal};

/// Standard normal draw with a concrete type, avoiding inference turbofish
/// noise at call sites.
pub fn randn<R: rand::Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Zero-order Bessel function of the first kind via its integral form,
/// `J0(x) = (1/pi) * int_0^pi cos(x sin(theta)) d(theta)`, evaluated with a
/// trapezoid rule. The integrand extends to a smooth periodic function, so
/// the rule converges spectrally; N = 4096 is accurate to machine precision
/// for |x| well beyond anything these tests use.
pub fn j0(x: f64) -> f64 {
    const N: usize = 4096;
    let h = std::f64::consts::PI / N as f64;
    let mut sum = 0.5 * ((x * (0.0f64).sin()).cos() + (x * std::f64::consts::PI.sin()).cos());
    for i in 1..N {
        sum += (x * (i as f64 * h).sin()).cos();
    }
    sum * h / std::f64::consts::PI
}

/// Standard normal CDF by Simpson integration of the density from 0 to |z|,
/// folded with symmetry. Step count keeps the error far below 1e-12 over the
/// range these tests use.
pub fn normal_cdf(z: f64) -> f64 {
    let a = z.abs();
    let steps = ((a * 4000.0).ceil() as usize).max(16);
    let n = steps + steps % 2; // Simpson needs an even count
    let h = a / n as f64;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut sum = density(0.0) + density(a);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * density(i as f64 * h);
    }
    let integral = sum * h / 3.0;
    if z >= 0.0 {
        0.5 + integral
    } else {
        0.5 - integral
    }
}

/// Brute-force Hampel filter: independent sliding-window median/MAD with
/// truncated edges and the strict MAD = 0 convention.
pub fn hampel_oracle(x: &[f64], window: usize, n_sigmas: f64) -> Vec<f64> {
    let n = x.len();
    if window > n {
        return x.to_vec();
    }
    let half = window / 2;
    let mut out = x.to_vec();
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let mut w: Vec<f64> = x[lo..=hi].to_vec();
        let med = sorted_median(&mut w);
        let mut dev: Vec<f64> = x[lo..=hi].iter().map(|&v| (v - med).abs()).collect();
        let mad = sorted_median(&mut dev);
        if (x[i] - med).abs() > n_sigmas * 1.4826 * mad {
            out[i] = med;
        }
    }
    out
}

fn sorted_median(w: &mut [f64]) -> f64 {
    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = w.len();
    if n % 2 == 1 {
        w[n / 2]
    } else {
        0.5 * (w[n / 2 - 1] + w[n / 2])
    }
}

/// Brute-force proximity feature: mean Pearson correlation over adjacent
/// subcarrier pairs of a power series, zero-variance pairs contributing 0.
pub fn pearson_mean_adjacent(series: &wiprox_core::PowerSeries) -> f64 {
    let ns = series.num_subcarriers;
    let mut total = 0.0;
    for sc in 0..ns - 1 {
        let a = series.column(sc);
        let b = series.column(sc + 1);
        total += pearson_oracle(&a, &b);
    }
    total / (ns - 1) as f64
}

/// Textbook Pearson correlation.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|&a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|&b| (b - my).powi(2)).sum();
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}

/// Brute-force unbiased-normalized autocorrelation, directly off the
/// definition.
pub fn acf_oracle(x: &[f64], num_lags: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|&v| v - mean).collect();
    let s2: f64 = d.iter().map(|&v| v * v).sum::<f64>() / n as f64;
    (0..num_lags)
        .map(|l| {
            let sum: f64 = (0..n - l).map(|t| d[t] * d[t + l]).sum();
            sum / ((n - l) as f64 * s2)
        })
        .collect()
}

/// Spearman rank correlation (no ties expected in these tests).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    };
    pearson_oracle(&rank(x), &rank(y))
}

/// Builds a synthetic combined-ACF result shaped like `J0(k * v * lag)` on a
/// uniform lag grid, optionally with additive white noise on lags > 0.
/// Clean curves are cached per parameter set; the quadrature oracle is slow.
pub fn j0_acf(
    v: f64,
    wave_number: f64,
    lag_step: f64,
    num_lags: usize,
    noise: &[f64],
) -> wiprox_core::AcfResult {
    use std::collections::HashMap;
    use std::sync::Mutex;
    static CACHE: Mutex<Option<HashMap<(u64, u64, u64, usize), Vec<f64>>>> = Mutex::new(None);

    let key = (v.to_bits(), wave_number.to_bits(), lag_step.to_bits(), num_lags);
    let clean = {
        let mut guard = CACHE.lock().unwrap();
        let map = guard.get_or_insert_with(HashMap::new);
        map.entry(key)
            .or_insert_with(|| {
                (0..num_lags).map(|l| j0(wave_number * v * l as f64 * lag_step)).collect()
            })
            .clone()
    };
    let lags: Vec<f64> = (0..num_lags).map(|l| l as f64 * lag_step).collect();
    let acf: Vec<f64> = clean
        .iter()
        .enumerate()
        .map(|(i, &c)| if i == 0 { c } else { c + noise.get(i).copied().unwrap_or(0.0) })
        .collect();
    wiprox_core::AcfResult {
        window_end: 0.0,
        lags,
        acf,
        acf_diff: Vec::new(),
        per_subcarrier_weight: vec![1.0],
        motion_stat: 1.0,
        degenerate: false,
    }
    .with_diff()
}
