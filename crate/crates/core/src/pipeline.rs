//! End-to-end scenarios: closed-loop phase residual (`fig3`), pump sweep with
//! synthetic measurement and fit (`fig4`), and noise spectra (`fig5`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    fit_phase_noise_model_with, integrate_psd, welch_psd, FitOptions, FitResult, PsdEstimate, SqueezingDataset,
    SqueezingPoint, Window,
};
use crate::locksim::{
    band_power_rel_uncertainty, band_rms, run_closed_loop, synth_common_mode_phase, synth_epr_photocurrents,
    synth_shot_reference, Disturbances, EprSource, LockRunResult, LoopConfig,
};
use crate::model::{db, SystemConfig};
use crate::nopo::steady_state_linear_solve;
use crate::spectra::{degraded_variance, spectrum_point, PhaseNoiseMode, Sign, SpectrumVariant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub var_minus_pn: f64,
    pub var_plus_pn: f64,
}

/// Phase-noise-degraded `ΔQ±²` over a list of pump values.
pub fn pump_sweep(epsilons: &[f64], eta: f64, sigma_theta: f64, omega_norm: f64, mode: PhaseNoiseMode) -> Result<Vec<SweepRow>> {
    epsilons
        .iter()
        .map(|&e| {
            Ok(SweepRow {
                epsilon: e,
                var_minus_pn: degraded_variance(e, eta, sigma_theta, omega_norm, Sign::Minus, mode)?,
                var_plus_pn: degraded_variance(e, eta, sigma_theta, omega_norm, Sign::Plus, mode)?,
            })
        })
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub omega_norm: f64,
    pub var_minus: f64,
    pub var_plus: f64,
    pub var_minus_db: f64,
    pub var_plus_db: f64,
}

pub fn spectrum_grid(epsilon: f64, eta: f64, omegas: &[f64], variant: SpectrumVariant) -> Result<Vec<SpectrumRow>> {
    omegas
        .iter()
        .map(|&om| {
            let p = spectrum_point(epsilon, eta, om, variant)?;
            Ok(SpectrumRow {
                omega_norm: om,
                var_minus: p.var_minus,
                var_plus: p.var_plus,
                var_minus_db: db(p.var_minus)?,
                var_plus_db: db(p.var_plus)?,
            })
        })
        .collect()
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer.
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Config {
    pub duration: f64,
    pub rate: f64,
    pub loop_s: LoopConfig,
    pub loop_i: LoopConfig,
    /// Defaults to [`Disturbances::typical`] seeded from the run seed.
    pub disturbances: Option<Disturbances>,
    pub psd_segment: usize,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Self {
            duration: 2.0,
            rate: 500e3,
            loop_s: LoopConfig::default(),
            loop_i: LoopConfig::idler_default(),
            disturbances: None,
            psd_segment: 1 << 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fig3Result {
    pub run: LockRunResult,
    pub psd: PsdEstimate,
    pub sigma_theta_rms: f64,
    /// `√∫ S_Θ df` over the whole estimate.
    pub sigma_theta_psd: f64,
}

/// Closed-loop run with the residual common-mode phase spectrum.
pub fn fig3(system: &SystemConfig, cfg: &Fig3Config, seed: u64) -> Result<Fig3Result> {
    system.validate()?;
    let fields = steady_state_linear_solve(&system.cavity, &system.pump, &system.seed)?;
    let disturbances = cfg.disturbances.clone().unwrap_or_else(|| Disturbances::typical(seed));
    let run = run_closed_loop(&cfg.loop_s, &cfg.loop_i, &disturbances, &fields, cfg.duration, cfg.rate)?;
    let seg = cfg.psd_segment.min(run.common_mode.len());
    let psd = welch_psd(&run.common_mode, seg, 0.5, Window::Hann)?;
    let f_max = *psd.frequencies.last().unwrap_or(&0.0);
    let sigma_theta_psd = integrate_psd(&psd, 0.0, f_max)?;
    Ok(Fig3Result {
        sigma_theta_rms: run.sigma_theta(),
        run,
        psd,
        sigma_theta_psd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Config {
    pub epsilons: Vec<f64>,
    /// Injected common-mode phase jitter (rad RMS).
    pub sigma_theta: f64,
    /// Corner of the injected jitter spectrum (Hz).
    pub theta_corner: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub duration: f64,
    pub rate: f64,
    pub dark_noise: bool,
    pub mode: PhaseNoiseMode,
    pub bootstrap_resamples: usize,
    /// Points of the analytic sweep written next to the measurements.
    pub sweep_points: usize,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            sigma_theta: 10e-3,
            theta_corner: 2e3,
            f_lo: 5e3,
            f_hi: 15e3,
            duration: 5.0,
            rate: 200e3,
            dark_noise: false,
            mode: PhaseNoiseMode::SmallAngle,
            bootstrap_resamples: 200,
            sweep_points: 99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig4Point {
    pub epsilon: f64,
    pub var_minus: f64,
    pub var_plus: f64,
    /// Fractional 1σ of each variance ratio.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Result {
    pub points: Vec<Fig4Point>,
    pub fit: FitResult,
    /// Analytic curve at the injected parameters.
    pub sweep: Vec<SweepRow>,
    pub omega_norm: f64,
    pub eta_injected: f64,
    pub sigma_injected: f64,
}

impl Fig4Result {
    /// Measured point with the lowest `ΔQ₋²`.
    pub fn best_point(&self) -> Option<&Fig4Point> {
        self.points.iter().min_by(|a, b| a.var_minus.total_cmp(&b.var_minus))
    }
}

/// Synthesizes one measurement per pump value with a common-mode phase
/// jitter of exactly `sigma_theta`, reads the band-limited variances and fits
/// `(η, σ_Θ)`.
pub fn fig4(system: &SystemConfig, cfg: &Fig4Config, seed: u64) -> Result<Fig4Result> {
    system.validate()?;
    if cfg.epsilons.is_empty() {
        return Err(Error::invalid("fig4 needs at least one pump value"));
    }
    let gamma_hz = system.cavity.gamma_total();
    let omega_norm = 0.5 * (cfg.f_lo + cfg.f_hi) / gamma_hz;
    let det = system.detection;
    let uncertainty = std::f64::consts::SQRT_2 * band_power_rel_uncertainty(cfg.f_lo, cfg.f_hi, cfg.duration);

    let points = cfg
        .epsilons
        .par_iter()
        .enumerate()
        .map(|(k, &epsilon)| {
            let k = k as u64;
            let theta = synth_common_mode_phase(
                cfg.sigma_theta,
                cfg.theta_corner,
                cfg.duration,
                cfg.rate,
                derive_seed(seed, 3 * k),
            )?;
            let source = EprSource {
                epsilon,
                eta_s: det.eta_s,
                eta_i: det.eta_i,
                gamma_hz,
                dark_noise: cfg.dark_noise,
            };
            let pc = synth_epr_photocurrents(&source, &theta, &theta, derive_seed(seed, 3 * k + 1))?;
            let shot = synth_shot_reference(cfg.duration, cfg.rate, derive_seed(seed, 3 * k + 2), cfg.dark_noise)?;
            Ok(Fig4Point {
                epsilon,
                var_minus: band_rms(&pc.combine(1.0, false)?, cfg.f_lo, cfg.f_hi, &shot)?,
                var_plus: band_rms(&pc.combine(1.0, true)?, cfg.f_lo, cfg.f_hi, &shot)?,
                uncertainty,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let data = SqueezingDataset::new(
        points
            .iter()
            .map(|p| SqueezingPoint {
                epsilon: p.epsilon,
                var_minus: p.var_minus,
                var_plus: p.var_plus,
                uncertainty: Some(p.uncertainty),
            })
            .collect(),
    )?;
    let opts = FitOptions {
        mode: cfg.mode,
        bootstrap_resamples: cfg.bootstrap_resamples,
        bootstrap_seed: derive_seed(seed, u64::MAX),
        ..FitOptions::default()
    };
    let fit = fit_phase_noise_model_with(&data, omega_norm, &opts)?;
    let eta_injected = 0.5 * (det.eta_s + det.eta_i);
    let sweep = pump_sweep(
        &linspace(0.0, 0.98, cfg.sweep_points),
        eta_injected,
        cfg.sigma_theta,
        omega_norm,
        cfg.mode,
    )?;
    Ok(Fig4Result {
        points,
        fit,
        sweep,
        omega_norm,
        eta_injected,
        sigma_injected: cfg.sigma_theta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig5Config {
    /// Defaults to the configured pump.
    pub epsilon: Option<f64>,
    pub f_lo: f64,
    pub f_hi: f64,
    pub points: usize,
    pub variant: SpectrumVariant,
}

impl Default for Fig5Config {
    fn default() -> Self {
        Self {
            epsilon: None,
            f_lo: 5e3,
            f_hi: 17e3,
            points: 121,
            variant: SpectrumVariant::Corrected,
        }
    }
}

/// Squeezing and anti-squeezing spectra over the analysis band.
pub fn fig5(system: &SystemConfig, cfg: &Fig5Config) -> Result<Vec<SpectrumRow>> {
    system.validate()?;
    if !(cfg.f_lo >= 0.0 && cfg.f_lo <= cfg.f_hi) || cfg.points == 0 {
        return Err(Error::invalid("fig5 band must satisfy 0 <= f_lo <= f_hi with points > 0"));
    }
    let gamma = system.cavity.gamma_total();
    let eta = 0.5 * (system.detection.eta_s + system.detection.eta_i);
    let eps = cfg.epsilon.unwrap_or(system.pump.epsilon);
    let omegas: Vec<f64> = linspace(cfg.f_lo, cfg.f_hi, cfg.points).iter().map(|f| f / gamma).collect();
    spectrum_grid(eps, eta, &omegas, cfg.variant)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let v = linspace(5.0, 17.0, 13);
        assert_eq!(v.len(), 13);
        assert_eq!(v[0], 5.0);
        assert_eq!(v[12], 17.0);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..16).map(|k| derive_seed(1, k)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn fig5_band_levels() {
        let rows = fig5(&SystemConfig::default(), &Fig5Config::default()).unwrap();
        assert_eq!(rows.len(), 121);
        assert!(rows.iter().all(|r| (r.var_minus_db + 9.17).abs() < 0.01));
        assert!(rows.iter().all(|r| (r.var_plus_db - 18.6).abs() < 0.05));
    }

    #[test]
    fn short_fig4_runs() {
        let cfg = Fig4Config {
            epsilons: vec![0.3, 0.5, 0.7, 0.9],
            duration: 0.5,
            bootstrap_resamples: 0,
            sweep_points: 5,
            ..Fig4Config::default()
        };
        let r = fig4(&SystemConfig::default(), &cfg, 1).unwrap();
        assert_eq!(r.points.len(), 4);
        assert!((r.fit.eta_hat - 0.89).abs() < 0.05, "{:?}", r.fit);
    }
}
