//! Median-Welch log power spectrum and normalised autocorrelation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{ACF_LEN, FEATURE_SCALE, PSD_LEN};
use crate::error::{Error, Result};

/// Additive floor before taking decibels.
pub const DB_EPSILON: f64 = 1e-12;

fn check_rate(sample_rate: f64) -> Result<()> {
    // fewer than 2 Hz leaves no integer frequency below Nyquist
    if !(sample_rate.is_finite() && sample_rate >= 2.0) {
        return Err(Error::InvalidSampleRate(sample_rate));
    }
    Ok(())
}

/// Symmetric Hamming taper.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

/// Segment layout for Welch's method: 1 s windows, 50% overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WelchLayout {
    pub window: usize,
    pub hop: usize,
    pub n_windows: usize,
}

impl WelchLayout {
    pub fn new(n_samples: usize, sample_rate: f64) -> Result<Self> {
        check_rate(sample_rate)?;
        let window = (sample_rate.round() as usize).max(2);
        if n_samples < window {
            return Err(Error::InsufficientData {
                needed: window,
                got: n_samples,
            });
        }
        let hop = window / 2;
        Ok(WelchLayout {
            window,
            hop,
            n_windows: 1 + (n_samples - window) / hop,
        })
    }

    pub fn start(&self, w: usize) -> usize {
        w * self.hop
    }
}

/// One-sided periodogram of every Welch segment; `result[w][k]` is the power
/// density of bin `k` (frequency `k * fs / window`) in segment `w`.
pub fn welch_periodograms(activity: &[f64], sample_rate: f64) -> Result<(WelchLayout, Vec<Vec<f64>>)> {
    let layout = WelchLayout::new(activity.len(), sample_rate)?;
    let n = layout.window;
    let taper = hamming(n);
    let taper_power: f64 = taper.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let n_bins = n / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(layout.n_windows);
    for w in 0..layout.n_windows {
        let seg = &activity[layout.start(w)..layout.start(w) + n];
        for ((b, &x), &t) in buf.iter_mut().zip(seg).zip(&taper) {
            *b = Complex::new(x * t, 0.0);
        }
        fft.process(&mut buf);
        let scale = 1.0 / (sample_rate * taper_power);
        let row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let p = buf[k].norm_sqr() * scale;
                let edge = k == 0 || (n % 2 == 0 && k == n / 2);
                if edge {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect();
        out.push(row);
    }
    Ok((layout, out))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Samples a one-sided spectrum (bin spacing `fs / window`) at 1..=100 Hz.
/// Frequencies above Nyquist repeat the highest integer frequency below it.
pub fn sample_integer_hz(spectrum: &[f64], sample_rate: f64, window: usize) -> Vec<f64> {
    let nyquist = sample_rate / 2.0;
    let last_valid = (nyquist.floor() as usize).clamp(1, PSD_LEN);
    let last_bin = spectrum.len() - 1;
    let at = |f: usize| {
        let pos = f as f64 * window as f64 / sample_rate;
        let lo = (pos.floor() as usize).min(last_bin);
        let hi = (lo + 1).min(last_bin);
        let frac = pos - lo as f64;
        if frac <= 0.0 || lo == hi {
            spectrum[lo]
        } else {
            spectrum[lo] * (1.0 - frac) + spectrum[hi] * frac
        }
    };
    (1..=PSD_LEN).map(|f| at(f.min(last_valid))).collect()
}

/// Median-Welch power spectral density in decibels at 1..=100 Hz.
pub fn median_welch_psd(activity: &[f64], sample_rate: f64) -> Result<Vec<f64>> {
    let (layout, periodograms) = welch_periodograms(activity, sample_rate)?;
    let n_bins = periodograms[0].len();
    let mut column = vec![0.0; periodograms.len()];
    let spectrum: Vec<f64> = (0..n_bins)
        .map(|k| {
            for (c, p) in column.iter_mut().zip(&periodograms) {
                *c = p[k];
            }
            median(&mut column)
        })
        .collect();
    Ok(sample_integer_hz(&spectrum, sample_rate, layout.window)
        .into_iter()
        .map(|p| 10.0 * (p + DB_EPSILON).log10())
        .collect())
}

/// Biased autocorrelation `r[k] = (1/n) sum_t (x_t - m)(x_{t+k} - m)` for lags
/// `0..=max_lag`, computed by FFT.
pub fn biased_autocorrelation(activity: &[f64], max_lag: usize) -> Vec<f64> {
    let n = activity.len();
    let mean = activity.iter().sum::<f64>() / n as f64;
    let size = (n + max_lag + 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = activity
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    forward.process(&mut buf);
    for b in buf.iter_mut() {
        *b = Complex::new(b.norm_sqr(), 0.0);
    }
    inverse.process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    (0..=max_lag.min(n - 1)).map(|k| buf[k].re * scale).collect()
}

/// Autocorrelation feature: 100 values at lags `j / 100` s, `j = 1..=100`,
/// scaled so that the (dropped) zero lag equals 0.99.
pub fn autocorrelation(activity: &[f64], sample_rate: f64) -> Result<Vec<f64>> {
    let mut full = resampled_autocorrelation(activity, sample_rate)?;
    full.remove(0);
    Ok(full)
}

/// The 101-point scaled autocorrelation on lags `j / 100` s, `j = 0..=100`,
/// before the zero lag is removed.
pub fn resampled_autocorrelation(activity: &[f64], sample_rate: f64) -> Result<Vec<f64>> {
    check_rate(sample_rate)?;
    let needed = (2.0 * sample_rate).ceil() as usize;
    if activity.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: activity.len(),
        });
    }
    let max_lag = sample_rate.ceil() as usize;
    let r = biased_autocorrelation(activity, max_lag);
    let r0 = r[0];
    let scale = activity.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(r0 > 1e-24 * scale * scale) || !r0.is_finite() {
        return Err(Error::UndefinedAutocorrelation);
    }
    let resampled = (0..=ACF_LEN).map(|j| {
        let pos = j as f64 / ACF_LEN as f64 * sample_rate;
        let lo = (pos.floor() as usize).min(max_lag);
        let hi = (lo + 1).min(max_lag);
        let frac = pos - lo as f64;
        if frac <= 0.0 || lo == hi {
            r[lo]
        } else {
            r[lo] * (1.0 - frac) + r[hi] * frac
        }
    });
    Ok(resampled.map(|v| FEATURE_SCALE * (v / r0)).collect())
}
