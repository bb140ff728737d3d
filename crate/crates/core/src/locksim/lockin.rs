use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{IqSeries, TimeSeries};

/// Streaming demodulator for a complex-baseband beat note: rotate by the
/// reference phase, take the quadrature, low-pass with a single pole.
#[derive(Debug, Clone)]
pub struct Lockin {
    rotation: Complex64,
    alpha: f64,
    state: f64,
}

impl Lockin {
    pub fn new(theta_ref: f64, lpf_cutoff: f64, sample_rate: f64) -> Result<Self> {
        if !(lpf_cutoff > 0.0) || !(lpf_cutoff < sample_rate / 4.0) {
            return Err(Error::invalid(format!(
                "lock-in cutoff {lpf_cutoff} Hz must lie in (0, sample_rate/4 = {} Hz)",
                sample_rate / 4.0
            )));
        }
        Ok(Self {
            rotation: Complex64::from_polar(1.0, theta_ref),
            alpha: -(-TAU * lpf_cutoff / sample_rate).exp_m1(),
            state: 0.0,
        })
    }

    pub fn update(&mut self, beat: Complex64) -> f64 {
        let quadrature = (beat * self.rotation).im;
        self.state += self.alpha * (quadrature - self.state);
        self.state
    }

    pub fn output(&self) -> f64 {
        self.state
    }
}

/// Demodulates a whole baseband record. A constant beat `A·e^{iφ}` settles to
/// `A·sin(φ + θ_ref)`.
pub fn lockin_demodulate(baseband_iq: &IqSeries, theta_ref: f64, lpf_cutoff: f64) -> Result<TimeSeries> {
    let mut lockin = Lockin::new(theta_ref, lpf_cutoff, baseband_iq.sample_rate)?;
    let out = baseband_iq.samples.iter().map(|&z| lockin.update(z)).collect();
    TimeSeries::new(baseband_iq.sample_rate, out, "signal")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{welch_psd, Window};

    fn constant(phi: f64, amp: f64, n: usize, rate: f64) -> IqSeries {
        TimeSeries::new(rate, vec![Complex64::from_polar(amp, phi); n], "beat").unwrap()
    }

    #[test]
    fn settles_within_five_time_constants() {
        let rate = 1e6;
        let fc = 1e4;
        let tau = 1.0 / (TAU * fc);
        let n = (5.0 * tau * rate).ceil() as usize;
        let (phi, amp, tref) = (0.3, 2.0, 0.4);
        let out = lockin_demodulate(&constant(phi, amp, n, rate), tref, fc).unwrap();
        let target = amp * (phi + tref).sin();
        let last = *out.samples.last().unwrap();
        assert!((last - target).abs() <= 0.01 * target.abs(), "{last} vs {target}");
    }

    #[test]
    fn zero_in_zero_out() {
        let out = lockin_demodulate(&constant(0.0, 0.0, 100, 1e5), 1.0, 1e3).unwrap();
        assert!(out.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cutoff_limit() {
        assert!(lockin_demodulate(&constant(0.0, 1.0, 10, 1e5), 0.0, 3e4).is_err());
    }

    #[test]
    fn slow_modulation_passes() {
        let rate = 1e6;
        let fc = 1e4;
        let fm = 500.0;
        let dev = 0.05;
        let n = 1 << 17;
        let beat: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, dev * (TAU * fm * k as f64 / rate).sin()))
            .collect();
        let out = lockin_demodulate(&TimeSeries::new(rate, beat, "beat").unwrap(), 0.0, fc).unwrap();
        // Reference: sin of the unfiltered phase.
        let ideal: Vec<f64> = (0..n)
            .map(|k| (dev * (TAU * fm * k as f64 / rate).sin()).sin())
            .collect();
        let skip = 10_000;
        let p_out: f64 = out.samples[skip..].iter().map(|x| x * x).sum();
        let p_in: f64 = ideal[skip..].iter().map(|x| x * x).sum();
        let atten_db = 10.0 * (p_out / p_in).log10();
        assert!(atten_db > -1.0 && atten_db < 0.01, "{atten_db}");
        let _ = welch_psd(&out, 4096, 0.5, Window::Hann).unwrap();
    }
}
