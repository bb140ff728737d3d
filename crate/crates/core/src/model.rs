//! Shared domain types and unit conventions.
//!
//! Configuration frequencies are cyclic (Hz). Spectra are evaluated at the
//! normalized Fourier frequency `Ω' = Ω/γ`, so the rad/s vs Hz choice cancels
//! as long as both numbers use the same convention. Quadrature variances are
//! in shot-noise units: the vacuum variance of a single-mode quadrature is 1.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex field amplitude (intracavity `α` or output `A`).
pub type ComplexAmp = Complex64;

/// Maximum relative mismatch tolerated in `1/λ_s + 1/λ_i = 1/λ_p`.
pub const ENERGY_CONSERVATION_TOL: f64 = 1e-3;

/// Wraps a phase into `(-π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let mut w = phase.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Signed distance between two phases, modulo 2π.
pub fn phase_difference(a: f64, b: f64) -> f64 {
    wrap_phase(a - b)
}

/// Converts a linear variance ratio to decibels.
pub fn db(linear_variance: f64) -> Result<f64> {
    if !(linear_variance > 0.0) || !linear_variance.is_finite() {
        return Err(Error::domain(format!(
            "dB conversion needs a positive finite value, got {linear_variance}"
        )));
    }
    Ok(10.0 * linear_variance.log10())
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {value}")))
    }
}

fn check_non_negative(name: &str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value < 0.0 {
        return Err(Error::invalid(format!("{name} must be >= 0, got {value}")));
    }
    Ok(())
}

fn check_unit_interval(name: &str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1], got {value}")));
    }
    Ok(())
}

/// Optical wavelengths of the three interacting fields and the coherent-lock
/// offset frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyPlan {
    /// Signal wavelength (m).
    pub lambda_s: f64,
    /// Idler wavelength (m).
    pub lambda_i: f64,
    /// Pump wavelength (m).
    pub lambda_p: f64,
    /// Seed offset `Ω_CL` from the signal resonance (Hz).
    pub omega_cl_offset: f64,
}

impl Default for FrequencyPlan {
    fn default() -> Self {
        Self {
            lambda_s: 1064e-9,
            lambda_i: 852e-9,
            lambda_p: 473e-9,
            omega_cl_offset: 3e6,
        }
    }
}

/// Outcome of an energy-conservation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanCheck {
    pub energy_conserved: bool,
    /// `|1/λ_s + 1/λ_i − 1/λ_p| / (1/λ_p)`.
    pub relative_mismatch: f64,
}

/// Checks `ħω_s + ħω_i = ħω_p` to [`ENERGY_CONSERVATION_TOL`].
///
/// Returns the diagnostic rather than an error when energy is not conserved;
/// only non-physical wavelengths are rejected outright.
pub fn validate_frequency_plan(plan: &FrequencyPlan) -> Result<PlanCheck> {
    for (name, value) in [
        ("lambda_s", plan.lambda_s),
        ("lambda_i", plan.lambda_i),
        ("lambda_p", plan.lambda_p),
    ] {
        check_finite(name, value)?;
        if value <= 0.0 {
            return Err(Error::invalid(format!("{name} must be > 0, got {value}")));
        }
    }
    let inv_p = 1.0 / plan.lambda_p;
    let mismatch = (1.0 / plan.lambda_s + 1.0 / plan.lambda_i - inv_p).abs() / inv_p;
    Ok(PlanCheck {
        energy_conserved: mismatch < ENERGY_CONSERVATION_TOL,
        relative_mismatch: mismatch,
    })
}

impl FrequencyPlan {
    pub fn new(lambda_s: f64, lambda_i: f64, lambda_p: f64, omega_cl_offset: f64) -> Result<Self> {
        let plan = Self {
            lambda_s,
            lambda_i,
            lambda_p,
            omega_cl_offset,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let check = validate_frequency_plan(self)?;
        if !check.energy_conserved {
            return Err(Error::invalid(format!(
                "wavelengths violate energy conservation (relative mismatch {:.3e})",
                check.relative_mismatch
            )));
        }
        check_finite("omega_cl_offset", self.omega_cl_offset)?;
        if self.omega_cl_offset <= 0.0 {
            return Err(Error::invalid("omega_cl_offset must be > 0"));
        }
        Ok(())
    }
}

/// Decay rates and detuning of the (symmetric) NOPO cavity, all in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    /// Input-coupler rate used for seed injection.
    pub gamma_in: f64,
    /// Output-coupler rate.
    pub gamma_out: f64,
    /// Spurious intracavity loss rate.
    pub mu: f64,
    /// Detuning `Δ` of the signal-side lock field (`Δ_s = −Δ_i = Δ`).
    pub delta: f64,
}

impl Default for CavityParams {
    /// 15 MHz total linewidth with a 3 MHz seed offset (`Δ' = 0.2`).
    fn default() -> Self {
        Self {
            gamma_in: 0.5e6,
            gamma_out: 13.5e6,
            mu: 1.0e6,
            delta: 3e6,
        }
    }
}

impl CavityParams {
    pub fn new(gamma_in: f64, gamma_out: f64, mu: f64, delta: f64) -> Result<Self> {
        let c = Self {
            gamma_in,
            gamma_out,
            mu,
            delta,
        };
        c.validate()?;
        Ok(c)
    }

    /// Impedance-matched lossless cavity with total rate `gamma` split evenly
    /// between the two couplers.
    pub fn matched(gamma: f64, delta: f64) -> Result<Self> {
        Self::new(gamma / 2.0, gamma / 2.0, 0.0, delta)
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("gamma_in", self.gamma_in)?;
        check_non_negative("gamma_out", self.gamma_out)?;
        check_non_negative("mu", self.mu)?;
        check_finite("delta", self.delta)?;
        if !(self.gamma_total() > 0.0) {
            return Err(Error::invalid("total cavity decay rate must be > 0"));
        }
        Ok(())
    }

    /// `γ = γ_in + γ_out + μ`, shared by signal and idler.
    pub fn gamma_total(&self) -> f64 {
        self.gamma_in + self.gamma_out + self.mu
    }

    /// `Δ' = Δ/γ`.
    pub fn normalized_detuning(&self) -> f64 {
        self.delta / self.gamma_total()
    }

    /// Fraction of intracavity loss leaving through the output coupler.
    pub fn escape_efficiency(&self) -> f64 {
        self.gamma_out / self.gamma_total()
    }
}

/// Normalized pump amplitude `ε = α_p/α_th` and pump phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpParams {
    pub epsilon: f64,
    pub phi_p: f64,
}

impl Default for PumpParams {
    fn default() -> Self {
        Self {
            epsilon: 0.8,
            phi_p: 0.0,
        }
    }
}

impl PumpParams {
    pub fn new(epsilon: f64, phi_p: f64) -> Result<Self> {
        let p = Self { epsilon, phi_p };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("epsilon", self.epsilon)?;
        check_finite("phi_p", self.phi_p)?;
        if self.epsilon >= 1.0 {
            return Err(Error::AboveThreshold(self.epsilon));
        }
        Ok(())
    }
}

/// Injected coherent-lock seed: amplitude in √(photons/s) and phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedParams {
    pub alpha_cl: f64,
    pub seed_phase: f64,
}

impl Default for SeedParams {
    /// Roughly 10 µW at 1064 nm.
    fn default() -> Self {
        Self {
            alpha_cl: 7.3e6,
            seed_phase: 0.0,
        }
    }
}

impl SeedParams {
    pub fn new(alpha_cl: f64, seed_phase: f64) -> Result<Self> {
        let s = Self {
            alpha_cl,
            seed_phase,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("alpha_cl", self.alpha_cl)?;
        check_finite("seed_phase", self.seed_phase)
    }

    pub fn complex_amplitude(&self) -> ComplexAmp {
        ComplexAmp::from_polar(self.alpha_cl, self.seed_phase)
    }
}

/// Homodyne detection parameters for the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionParams {
    pub eta_s: f64,
    pub eta_i: f64,
    pub theta_ref_s: f64,
    pub theta_ref_i: f64,
    /// Relative weight `g` of the idler photocurrent in `Q±(g)`.
    pub g_weight: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            eta_s: 0.89,
            eta_i: 0.89,
            theta_ref_s: 0.0,
            theta_ref_i: 0.0,
            g_weight: 1.0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        check_unit_interval("eta_s", self.eta_s)?;
        check_unit_interval("eta_i", self.eta_i)?;
        check_finite("theta_ref_s", self.theta_ref_s)?;
        check_finite("theta_ref_i", self.theta_ref_i)?;
        check_finite("g_weight", self.g_weight)?;
        if self.g_weight <= 0.0 {
            return Err(Error::invalid("g_weight must be > 0"));
        }
        Ok(())
    }
}

/// Per-arm detection phase noise and its covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNoiseSpec {
    /// Standard deviation of `δθ_s` (rad).
    pub sigma_s: f64,
    /// Standard deviation of `δθ_i` (rad).
    pub sigma_i: f64,
    /// `Cov(δθ_s, δθ_i)` (rad²).
    pub cov_si: f64,
}

impl Default for PhaseNoiseSpec {
    /// Independent arms giving `σ_Θ = 10 mrad`.
    fn default() -> Self {
        Self {
            sigma_s: 10e-3 * std::f64::consts::SQRT_2,
            sigma_i: 10e-3 * std::f64::consts::SQRT_2,
            cov_si: 0.0,
        }
    }
}

impl PhaseNoiseSpec {
    pub fn new(sigma_s: f64, sigma_i: f64, cov_si: f64) -> Result<Self> {
        let s = Self {
            sigma_s,
            sigma_i,
            cov_si,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("sigma_s", self.sigma_s)?;
        check_non_negative("sigma_i", self.sigma_i)?;
        check_finite("cov_si", self.cov_si)?;
        // Small slack so that a fully correlated pair built from rounded
        // numbers is still accepted.
        let bound = self.sigma_s * self.sigma_i;
        if self.cov_si.abs() > bound * (1.0 + 1e-12) + f64::EPSILON * bound.max(1e-300) {
            return Err(Error::invalid(format!(
                "|cov_si| = {} exceeds sigma_s*sigma_i = {}",
                self.cov_si.abs(),
                bound
            )));
        }
        Ok(())
    }

    /// Variance of the common mode `Θ = (δθ_s + δθ_i)/2`.
    pub fn common_mode_variance(&self) -> f64 {
        (self.sigma_s * self.sigma_s + self.sigma_i * self.sigma_i + 2.0 * self.cov_si) / 4.0
    }
}

/// Top-level system description, one block per domain type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub frequency_plan: FrequencyPlan,
    pub cavity: CavityParams,
    pub pump: PumpParams,
    pub seed: SeedParams,
    pub detection: DetectionParams,
    pub phase_noise: PhaseNoiseSpec,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.frequency_plan.validate()?;
        self.cavity.validate()?;
        self.pump.validate()?;
        self.seed.validate()?;
        self.detection.validate()?;
        self.phase_noise.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_wavelengths_conserve_energy() {
        let plan = FrequencyPlan::new(1064e-9, 852e-9, 473e-9, 3e6).unwrap();
        assert!(validate_frequency_plan(&plan).unwrap().energy_conserved);
    }

    #[test]
    fn degenerate_plan_conserves_energy() {
        let plan = FrequencyPlan {
            lambda_s: 1064e-9,
            lambda_i: 1064e-9,
            lambda_p: 532e-9,
            omega_cl_offset: 1.0,
        };
        let check = validate_frequency_plan(&plan).unwrap();
        assert!(check.energy_conserved);
        assert!(check.relative_mismatch < 1e-12);
    }

    #[test]
    fn wrong_pump_wavelength_is_flagged() {
        let plan = FrequencyPlan {
            lambda_p: 500e-9,
            ..FrequencyPlan::default()
        };
        let check = validate_frequency_plan(&plan).unwrap();
        assert!(!check.energy_conserved);
        // 1/1064 + 1/852 = 1/473.1 nm⁻¹ versus 1/500.
        assert_relative_eq!(check.relative_mismatch, 500.0 / 473.13 - 1.0, max_relative = 1e-3);
        assert!(plan.validate().is_err());
    }

    #[test]
    fn non_positive_wavelength_rejected() {
        let plan = FrequencyPlan {
            lambda_i: 0.0,
            ..FrequencyPlan::default()
        };
        assert!(matches!(
            validate_frequency_plan(&plan),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_offset_rejected() {
        assert!(FrequencyPlan::new(1064e-9, 852e-9, 473e-9, 0.0).is_err());
    }

    #[test]
    fn db_values() {
        assert_eq!(db(1.0).unwrap(), 0.0);
        assert_relative_eq!(db(100.0).unwrap(), 20.0, epsilon = 1e-12);
        assert_relative_eq!(db(0.1210).unwrap(), -9.172, epsilon = 1e-3);
        assert!(db(0.0).is_err());
        assert!(db(-1.0).is_err());
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_relative_eq!(wrap_phase(-PI), PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(wrap_phase(7.0 * TAU + 0.25), 0.25, epsilon = 1e-12);
        assert_relative_eq!(phase_difference(0.1, TAU - 0.1), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn pump_threshold_enforced() {
        assert!(PumpParams::new(0.99, 0.0).is_ok());
        assert_eq!(PumpParams::new(1.0, 0.0), Err(Error::AboveThreshold(1.0)));
        assert!(PumpParams::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn cavity_validation() {
        assert!(CavityParams::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(CavityParams::new(-1.0, 2.0, 0.0, 0.0).is_err());
        let c = CavityParams::default();
        assert_relative_eq!(c.gamma_total(), 15e6);
        assert_relative_eq!(c.normalized_detuning(), 0.2);
    }

    #[test]
    fn detection_efficiency_bounds() {
        let mut d = DetectionParams::default();
        assert!(d.validate().is_ok());
        d.eta_i = 1.2;
        assert!(d.validate().is_err());
        d.eta_i = 0.5;
        d.g_weight = 0.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn phase_noise_cauchy_schwarz() {
        assert!(PhaseNoiseSpec::new(0.01, 0.01, 1e-4).is_ok());
        assert!(PhaseNoiseSpec::new(0.01, 0.01, 1.1e-4).is_err());
        assert!(PhaseNoiseSpec::new(-0.01, 0.01, 0.0).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        assert_relative_eq!(cfg.phase_noise.common_mode_variance().sqrt(), 0.010, epsilon = 1e-15);
    }
}
