use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Longest default segment.
pub const MAX_DEFAULT_SEGMENT: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window of length `n`.
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdEstimate {
    /// Bin frequencies from 0 to Nyquist (Hz).
    pub frequencies: Vec<f64>,
    /// units²/Hz.
    pub densities: Vec<f64>,
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub window: Window,
    pub segments: usize,
}

impl PsdEstimate {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }
}

/// Default segment length: `min(len/8, 2¹⁶)`, at least 2.
pub fn default_segment_length(len: usize) -> usize {
    (len / 8).clamp(2, MAX_DEFAULT_SEGMENT).min(len.max(1))
}

/// Welch estimate with the default Hann window, 50 % overlap and
/// [`default_segment_length`].
pub fn welch_psd_default(series: &TimeSeries) -> Result<PsdEstimate> {
    welch_psd(series, default_segment_length(series.len()), 0.5, Window::Hann)
}

/// Averaged modified periodogram.
///
/// Each segment has its mean removed, so the one-sided density integrates to
/// the series variance rather than its mean square.
pub fn welch_psd(series: &TimeSeries, segment_length: usize, overlap_fraction: f64, window: Window) -> Result<PsdEstimate> {
    let n = series.len();
    if segment_length < 2 {
        return Err(Error::invalid("segment_length must be >= 2"));
    }
    if segment_length > n {
        return Err(Error::invalid(format!(
            "series of {n} samples is shorter than one segment of {segment_length}"
        )));
    }
    if !(0.0..=0.9).contains(&overlap_fraction) {
        return Err(Error::invalid(format!("overlap must lie in [0, 0.9], got {overlap_fraction}")));
    }

    let step = (segment_length - (overlap_fraction * segment_length as f64).round() as usize).max(1);
    let segments = (n - segment_length) / step + 1;
    let w = window.coefficients(segment_length);
    let w_power: f64 = w.iter().map(|x| x * x).sum();
    let fs = series.sample_rate;

    let fft = FftPlanner::new().plan_fft_forward(segment_length);
    let bins = segment_length / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_length];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for s in 0..segments {
        let seg = &series.samples[s * step..s * step + segment_length];
        let mean = seg.iter().sum::<f64>() / segment_length as f64;
        for ((b, &x), &wk) in buf.iter_mut().zip(seg).zip(&w) {
            *b = Complex64::new((x - mean) * wk, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    let scale = 1.0 / (fs * w_power * segments as f64);
    let nyquist_bin = (segment_length % 2 == 0).then_some(bins - 1);
    let densities = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let frequencies = (0..bins).map(|k| k as f64 * fs / segment_length as f64).collect();
    Ok(PsdEstimate {
        frequencies,
        densities,
        segment_length,
        overlap_fraction,
        window,
        segments,
    })
}

/// Trapezoidal integral of the density over the bins inside `[f_lo, f_hi]`.
pub fn band_power(psd: &PsdEstimate, f_lo: f64, f_hi: f64) -> Result<f64> {
    if !(f_lo < f_hi) {
        return Err(Error::invalid(format!("empty band [{f_lo}, {f_hi}]")));
    }
    let f_max = psd.frequencies.last().copied().unwrap_or(0.0);
    if f_lo < 0.0 || f_hi > f_max * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "band [{f_lo}, {f_hi}] Hz lies outside the estimate range [0, {f_max}] Hz"
        )));
    }
    let inside: Vec<(f64, f64)> = psd
        .frequencies
        .iter()
        .zip(&psd.densities)
        .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
        .map(|(f, d)| (*f, *d))
        .collect();
    if inside.len() < 2 {
        return Err(Error::invalid(format!(
            "band [{f_lo}, {f_hi}] Hz contains fewer than two frequency bins"
        )));
    }
    Ok(inside
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum())
}

/// RMS amplitude in a band: `√(∫ S(f) df)`.
pub fn integrate_psd(psd: &PsdEstimate, f_lo: f64, f_hi: f64) -> Result<f64> {
    band_power(psd, f_lo, f_hi).map(f64::sqrt)
}
