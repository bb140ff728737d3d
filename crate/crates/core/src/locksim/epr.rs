use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{band_power, welch_psd, Window};
use crate::series::TimeSeries;

/// Electronic dark-noise floor relative to shot noise (dB).
pub const DARK_NOISE_DB: f64 = -24.0;

/// Source and detector parameters for synthetic homodyne photocurrents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprSource {
    pub epsilon: f64,
    pub eta_s: f64,
    pub eta_i: f64,
    /// Cavity half-width (Hz) setting the squeezing bandwidth.
    pub gamma_hz: f64,
    #[serde(default)]
    pub dark_noise: bool,
}

impl EprSource {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::AboveThreshold(self.epsilon));
        }
        for (name, eta) in [("eta_s", self.eta_s), ("eta_i", self.eta_i)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {eta}")));
            }
        }
        if !(self.gamma_hz > 0.0) {
            return Err(Error::invalid("gamma_hz must be > 0"));
        }
        Ok(())
    }
}

/// Synthetic signal and idler photocurrents in shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct EprPhotocurrents {
    pub q_s: TimeSeries,
    pub q_i: TimeSeries,
}

impl EprPhotocurrents {
    /// `(q_s ± g·q_i)/√(1+g²)`, normalized so vacuum reads 1.
    pub fn combine(&self, g: f64, plus: bool) -> Result<TimeSeries> {
        let s = if plus { g } else { -g };
        let norm = (1.0 + g * g).sqrt().recip();
        TimeSeries::new(
            self.q_s.sample_rate,
            self.q_s
                .samples
                .iter()
                .zip(&self.q_i.samples)
                .map(|(a, b)| (a + s * b) * norm)
                .collect(),
            "snu",
        )
    }
}

fn sample_count(duration: f64, rate: f64) -> Result<usize> {
    if !(rate > 0.0) || !(duration > 0.0) {
        return Err(Error::invalid("duration and rate must be > 0"));
    }
    let n = (duration * rate).round();
    if n < 16.0 {
        return Err(Error::invalid("record needs at least 16 samples"));
    }
    Ok(n as usize)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Filters two independent white sequences (real and imaginary parts) by the
/// same Hermitian-symmetric response, so both outputs stay real.
fn shape_pair(rng: &mut ChaCha8Rng, n: usize, rate: f64, response: impl Fn(f64) -> Complex64) -> (Vec<f64>, Vec<f64>) {
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = (0..n).map(|_| Complex64::new(gaussian(rng), gaussian(rng))).collect();
    fwd.process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * rate / n as f64;
        *b *= response(f);
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|z| (z.re * scale, z.im * scale)).unzip()
}

/// Generates correlated photocurrents from a two-mode squeezed source seen
/// through phase residuals `δθ_s`, `δθ_i` and detection losses.
///
/// The sum and difference quadratures are shaped so their spectra follow
/// `1 ± 4ε/(Ω'² + (1∓ε)²)` at `η = 1`.
pub fn synth_epr_photocurrents(
    source: &EprSource,
    residual_s: &TimeSeries,
    residual_i: &TimeSeries,
    seed: u64,
) -> Result<EprPhotocurrents> {
    source.validate()?;
    let rate = residual_s.sample_rate;
    if residual_i.sample_rate != rate || residual_i.len() != residual_s.len() {
        return Err(Error::invalid("residual series must share rate and length"));
    }
    let n = sample_count(residual_s.len() as f64 / rate, rate)?;
    let eps = source.epsilon;
    let gamma = source.gamma_hz;
    let squeezed = move |f: f64| Complex64::new(1.0 - eps, f / gamma) / Complex64::new(1.0 + eps, f / gamma);
    let anti = move |f: f64| Complex64::new(1.0 + eps, f / gamma) / Complex64::new(1.0 - eps, f / gamma);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // x₋ and p₊ squeezed, x₊ and p₋ anti-squeezed.
    let (x_minus, p_plus) = shape_pair(&mut rng, n, rate, squeezed);
    let (x_plus, p_minus) = shape_pair(&mut rng, n, rate, anti);

    let dark_sd = if source.dark_noise {
        10f64.powf(DARK_NOISE_DB / 10.0).sqrt()
    } else {
        0.0
    };
    let (ts, ti) = (source.eta_s.sqrt(), source.eta_i.sqrt());
    let (ls, li) = ((1.0 - source.eta_s).sqrt(), (1.0 - source.eta_i).sqrt());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut q_s = Vec::with_capacity(n);
    let mut q_i = Vec::with_capacity(n);
    for k in 0..n {
        let xs = r * (x_plus[k] + x_minus[k]);
        let xi = r * (x_plus[k] - x_minus[k]);
        let ps = r * (p_plus[k] + p_minus[k]);
        let pi = r * (p_plus[k] - p_minus[k]);
        let (ss, cs) = residual_s.samples[k].sin_cos();
        let (si, ci) = residual_i.samples[k].sin_cos();
        let qs = ts * (xs * cs + ps * ss) + ls * gaussian(&mut rng) + dark_sd * gaussian(&mut rng);
        let qi = ti * (xi * ci + pi * si) + li * gaussian(&mut rng) + dark_sd * gaussian(&mut rng);
        q_s.push(qs);
        q_i.push(qi);
    }
    Ok(EprPhotocurrents {
        q_s: TimeSeries::new(rate, q_s, "snu")?,
        q_i: TimeSeries::new(rate, q_i, "snu")?,
    })
}

/// Vacuum (blocked-signal) reference in the same units as the combined
/// photocurrents.
pub fn synth_shot_reference(duration: f64, rate: f64, seed: u64, dark_noise: bool) -> Result<TimeSeries> {
    let n = sample_count(duration, rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dark_sd = if dark_noise {
        10f64.powf(DARK_NOISE_DB / 10.0).sqrt()
    } else {
        0.0
    };
    let s = (0..n)
        .map(|_| gaussian(&mut rng) + dark_sd * gaussian(&mut rng))
        .collect();
    TimeSeries::new(rate, s, "snu")
}

/// Ornstein–Uhlenbeck phase jitter with corner `corner_hz`, rescaled so its
/// sample RMS is exactly `sigma`.
pub fn synth_common_mode_phase(sigma: f64, corner_hz: f64, duration: f64, rate: f64, seed: u64) -> Result<TimeSeries> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma must be >= 0"));
    }
    if !(corner_hz > 0.0) {
        return Err(Error::invalid("corner frequency must be > 0"));
    }
    let n = sample_count(duration, rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (-std::f64::consts::TAU * corner_hz / rate).exp();
    let b = (1.0 - a * a).sqrt();
    let mut x = gaussian(&mut rng);
    let mut s: Vec<f64> = (0..n)
        .map(|_| {
            let out = x;
            x = a * x + b * gaussian(&mut rng);
            out
        })
        .collect();
    let rms = (s.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let scale = if rms > 0.0 { sigma / rms } else { 0.0 };
    s.iter_mut().for_each(|v| *v *= scale);
    TimeSeries::new(rate, s, "rad")
}

/// Segment length used for band-limited noise estimates.
pub const BAND_SEGMENT: usize = 4096;

/// Noise power in `[f_lo, f_hi]` relative to the shot-noise reference, as a
/// linear variance ratio.
pub fn band_rms(series: &TimeSeries, f_lo: f64, f_hi: f64, shot_reference: &TimeSeries) -> Result<f64> {
    let fs = series.sample_rate;
    if !(f_lo >= 0.0 && f_lo < f_hi && f_hi < fs / 2.0) {
        return Err(Error::invalid(format!(
            "band [{f_lo}, {f_hi}] Hz must satisfy 0 <= f_lo < f_hi < fs/2 = {} Hz",
            fs / 2.0
        )));
    }
    if shot_reference.sample_rate != fs {
        return Err(Error::invalid("shot reference must share the sample rate"));
    }
    let seg = BAND_SEGMENT.min(series.len()).min(shot_reference.len());
    let num = band_power(&welch_psd(series, seg, 0.5, Window::Hann)?, f_lo, f_hi)?;
    let den = band_power(&welch_psd(shot_reference, seg, 0.5, Window::Hann)?, f_lo, f_hi)?;
    if !(den > 0.0) {
        return Err(Error::Numerical("shot reference has no power in the band".into()));
    }
    Ok(num / den)
}

/// Expected relative standard error of a band-power estimate, `√(2/(B·T))`.
pub fn band_power_rel_uncertainty(f_lo: f64, f_hi: f64, duration: f64) -> f64 {
    (2.0 / ((f_hi - f_lo) * duration)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{two_mode_variance, Sign, SpectrumVariant};

    const RATE: f64 = 200e3;

    fn zeros(n: usize) -> TimeSeries {
        TimeSeries::zeros(RATE, n, "rad").unwrap()
    }

    fn source(eps: f64) -> EprSource {
        EprSource {
            epsilon: eps,
            eta_s: 1.0,
            eta_i: 1.0,
            gamma_hz: 15e6,
            dark_noise: false,
        }
    }

    #[test]
    fn vacuum_reads_unity() {
        let n = 400_000;
        let pc = synth_epr_photocurrents(&source(0.0), &zeros(n), &zeros(n), 1).unwrap();
        let shot = synth_shot_reference(n as f64 / RATE, RATE, 2, false).unwrap();
        let v = band_rms(&pc.combine(1.0, false).unwrap(), 5e3, 15e3, &shot).unwrap();
        assert!((v - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn lossless_levels_match_model() {
        let n = 400_000;
        let eps = 0.6;
        let pc = synth_epr_photocurrents(&source(eps), &zeros(n), &zeros(n), 3).unwrap();
        let shot = synth_shot_reference(n as f64 / RATE, RATE, 4, false).unwrap();
        let om = 10e3 / 15e6;
        for (plus, sign) in [(false, Sign::Minus), (true, Sign::Plus)] {
            let v = band_rms(&pc.combine(1.0, plus).unwrap(), 5e3, 15e3, &shot).unwrap();
            let expected = two_mode_variance(eps, 1.0, om, sign, SpectrumVariant::Corrected).unwrap();
            assert!((v / expected - 1.0).abs() < 0.03, "{plus}: {v} vs {expected}");
        }
    }

    #[test]
    fn deterministic() {
        let n = 1024;
        let a = synth_epr_photocurrents(&source(0.5), &zeros(n), &zeros(n), 9).unwrap();
        let b = synth_epr_photocurrents(&source(0.5), &zeros(n), &zeros(n), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn band_checks() {
        let s = synth_shot_reference(0.1, RATE, 0, false).unwrap();
        assert!(band_rms(&s, 5e3, 100e3, &s).is_err());
        assert!(band_rms(&s, 15e3, 5e3, &s).is_err());
        assert!((band_rms(&s, 5e3, 15e3, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn common_mode_phase_has_exact_rms() {
        let t = synth_common_mode_phase(0.01, 1e3, 0.5, RATE, 5).unwrap();
        assert!((t.rms() - 0.01).abs() < 1e-15);
        assert!(synth_common_mode_phase(0.0, 1e3, 0.5, RATE, 5).unwrap().rms() == 0.0);
    }

    #[test]
    fn uncertainty_formula() {
        assert!((band_power_rel_uncertainty(5e3, 15e3, 5.0) - 0.02 / 10f64.sqrt()).abs() < 1e-12);
    }
}
