//! Averaged periodogram estimators.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            // periodic Hann
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Averages |FFT(w·x)|²/(fs·Σw²) over segments of `len` samples spaced by
/// `step`. Returns the two-sided periodogram in FFT order and the number of
/// segments.
pub(crate) fn averaged_periodogram(x: &[Complex64], fs: f64, len: usize, step: usize, window: Window) -> Result<(Vec<f64>, usize)> {
    if len == 0 || len > x.len() {
        return Err(Error::InsufficientData(format!(
            "segment length {len} does not fit a trace of {} samples",
            x.len()
        )));
    }
    let count = (x.len() - len) / step + 1;
    if count < 2 {
        return Err(Error::InsufficientData(format!("only {count} segment(s); at least 2 are required")));
    }
    let w = window.coefficients(len);
    let norm = fs * w.iter().map(|v| v * v).sum::<f64>();
    let fft = FftPlanner::new().plan_fft_forward(len);
    let mut acc = vec![0.0; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for k in 0..count {
        let seg = &x[k * step..k * step + len];
        for ((b, s), wi) in buf.iter_mut().zip(seg).zip(&w) {
            *b = s * wi;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (norm * count as f64);
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok((acc, count))
}

fn segment_step(len: usize, overlap: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid("overlap_fraction", "must lie in [0, 1)"));
    }
    Ok(((len as f64 * (1.0 - overlap)).round() as usize).max(1))
}

/// One-sided PSD (per Hz) of a real series.
pub fn welch_psd(x: &[f64], fs: f64, segment_length: usize, overlap_fraction: f64, window: Window) -> Result<SpectrumData> {
    let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let step = segment_step(segment_length, overlap_fraction)?;
    let (p, count) = averaged_periodogram(&z, fs, segment_length, step, window)?;
    Ok(one_sided(&p, fs, count)?
        .with_meta("window", serde_json::to_value(window)?)
        .with_meta("overlap", overlap_fraction))
}

/// Two-sided PSD (per Hz) of a complex series on an ascending grid from
/// −fs/2 to fs/2.
pub fn welch_psd_complex(
    x: &[Complex64],
    fs: f64,
    segment_length: usize,
    overlap_fraction: f64,
    window: Window,
) -> Result<SpectrumData> {
    let step = segment_step(segment_length, overlap_fraction)?;
    let (p, count) = averaged_periodogram(x, fs, segment_length, step, window)?;
    Ok(two_sided(&p, fs, count)?
        .with_meta("window", serde_json::to_value(window)?)
        .with_meta("overlap", overlap_fraction))
}

pub(crate) fn one_sided(p: &[f64], fs: f64, count: usize) -> Result<SpectrumData> {
    let n = p.len();
    let df = fs / n as f64;
    let m = n / 2 + 1;
    let psd: Vec<f64> = (0..m)
        .map(|k| if k == 0 || (n % 2 == 0 && k == n / 2) { p[k] } else { 2.0 * p[k] })
        .collect();
    SpectrumData::new(SpectrumData::grid(0.0, df, m), psd, count)
}

pub(crate) fn two_sided(p: &[f64], fs: f64, count: usize) -> Result<SpectrumData> {
    let n = p.len();
    let df = fs / n as f64;
    let half = n / 2;
    let psd: Vec<f64> = (0..n).map(|k| p[(k + n - half) % n]).collect();
    SpectrumData::new(SpectrumData::grid(-(half as f64) * df, df, n), psd, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn sinusoid_power() {
        let fs = 1000.0;
        let a = 3.0;
        let x: Vec<f64> = (0..100_000)
            .map(|i| a * (std::f64::consts::TAU * 125.0 * i as f64 / fs).sin())
            .collect();
        let p = welch_psd(&x, fs, 1000, 0.5, Window::Hann).unwrap();
        let k = p.bin_of(125.0);
        let power: f64 = p.psd[k - 3..=k + 3].iter().sum::<f64>() * p.resolution_hz;
        assert!((power / (a * a / 2.0) - 1.0).abs() < 0.01, "{power}");
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = crate::seed::stream(5, 0);
        let fs = 200.0;
        let sigma = 2.0;
        let x: Vec<f64> = (0..400_000).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); sigma * z }).collect();
        let p = welch_psd(&x, fs, 400, 0.5, Window::Hann).unwrap();
        let expected = 2.0 * sigma * sigma / fs;
        let inner = &p.psd[5..p.len() - 5];
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        assert!((mean / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn needs_two_segments() {
        assert!(welch_psd(&[0.0; 100], 1.0, 100, 0.5, Window::Hann).is_err());
        assert!(welch_psd(&[0.0; 100], 1.0, 200, 0.5, Window::Hann).is_err());
        assert_eq!(welch_psd(&[0.0; 100], 1.0, 50, 0.5, Window::Hann).unwrap().n_avg, 3);
    }

    #[test]
    fn complex_grid_is_centered() {
        let x = vec![Complex64::new(1.0, 0.0); 64];
        let p = welch_psd_complex(&x, 8.0, 16, 0.0, Window::Rectangular).unwrap();
        assert_eq!(p.freq_hz[0], -4.0);
        assert_eq!(p.freq_hz[8], 0.0);
        assert_eq!(p.n_avg, 4);
        assert!(p.psd[8] > 0.0 && p.psd[9] == 0.0);
    }
}
