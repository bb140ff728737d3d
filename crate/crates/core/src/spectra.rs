//! Two-mode squeezing spectra of the below-threshold NOPO and what happens to
//! them under detection loss, phase noise and unequal weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PhaseNoiseSpec;
use crate::optim::golden_section;

/// Upper end of the pump range searched by [`optimal_epsilon`].
pub const EPSILON_SEARCH_MAX: f64 = 0.99;

/// Bounds of the log-scale search over the combination weight `g`.
pub const WEIGHT_SEARCH_RANGE: (f64, f64) = (1e-3, 1e3);

const SEARCH_TOL: f64 = 1e-8;

/// Joint quadrature `Q± = (q_s ± q_i)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Which form of the two-mode spectrum to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumVariant {
    /// `(Ω'² + (1+ε)²)` in the denominator for both signs.
    Literal,
    /// `(1+ε)²` for squeezing, `(1−ε)²` for anti-squeezing.
    #[default]
    Corrected,
}

/// How to average over Gaussian common-mode phase jitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseNoiseMode {
    /// `V(1 − σ²) + V_⊥ σ²`.
    #[default]
    SmallAngle,
    /// Exact average using `E[cos²Θ] = (1 + e^{−2σ²})/2`.
    ExactGaussian,
}

/// Quadrature sector of a [`CovarianceModel`]: the setpoint quadratures
/// `q_k(θ_ref)` or their orthogonal partners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sector {
    Amplitude,
    Orthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub omega_norm: f64,
    pub var_minus: f64,
    pub var_plus: f64,
}

fn check_pump(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if epsilon >= 1.0 {
        return Err(Error::AboveThreshold(epsilon));
    }
    Ok(())
}

fn check_efficiency(name: &str, eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// Normalized noise of `Q±` at Fourier frequency `Ω' = Ω/γ`:
/// `1 ± η·4ε / (Ω'² + (1 ± ε)²)` for the corrected variant.
pub fn two_mode_variance(
    epsilon: f64,
    eta: f64,
    omega_norm: f64,
    sign: Sign,
    variant: SpectrumVariant,
) -> Result<f64> {
    check_pump(epsilon)?;
    check_efficiency("eta", eta)?;
    if !omega_norm.is_finite() {
        return Err(Error::invalid("omega_norm must be finite"));
    }
    let shift = match (variant, sign) {
        (SpectrumVariant::Corrected, Sign::Plus) => 1.0 - epsilon,
        _ => 1.0 + epsilon,
    };
    let lorentzian = 4.0 * epsilon / (omega_norm * omega_norm + shift * shift);
    Ok(1.0 + sign.factor() * eta * lorentzian)
}

pub fn spectrum_point(epsilon: f64, eta: f64, omega_norm: f64, variant: SpectrumVariant) -> Result<SpectrumPoint> {
    Ok(SpectrumPoint {
        omega_norm,
        var_minus: two_mode_variance(epsilon, eta, omega_norm, Sign::Minus, variant)?,
        var_plus: two_mode_variance(epsilon, eta, omega_norm, Sign::Plus, variant)?,
    })
}

/// Variance of the orthogonal combination `Q±^{π/2}`, which behaves as `Q∓`.
pub fn orthogonal_variance(var_plus: f64, var_minus: f64, sign: Sign) -> f64 {
    match sign {
        Sign::Plus => var_minus,
        Sign::Minus => var_plus,
    }
}

/// Variance measured when the detection angle jitters by a zero-mean Gaussian
/// `Θ` with standard deviation `sigma_theta`.
pub fn phase_noise_variance(var_ideal: f64, var_orthogonal: f64, sigma_theta: f64, mode: PhaseNoiseMode) -> Result<f64> {
    if !(sigma_theta >= 0.0) || !sigma_theta.is_finite() {
        return Err(Error::invalid(format!("sigma_theta must be >= 0, got {sigma_theta}")));
    }
    let (w_ideal, w_orth) = match mode {
        PhaseNoiseMode::SmallAngle => {
            let s2 = sigma_theta * sigma_theta;
            (1.0 - s2, s2)
        }
        PhaseNoiseMode::ExactGaussian => {
            // E[sin²Θ] = (1 − e^{−2σ²})/2, written with expm1 for small σ.
            let sin2 = -(-2.0 * sigma_theta * sigma_theta).exp_m1() / 2.0;
            (1.0 - sin2, sin2)
        }
    };
    Ok(var_ideal * w_ideal + var_orthogonal * w_orth)
}

/// `σ_Θ = √((σ_s² + σ_i² + 2 cov)/4)`.
pub fn sigma_theta_common(spec: &PhaseNoiseSpec) -> Result<f64> {
    let var = spec.common_mode_variance();
    if !(var >= 0.0) {
        return Err(Error::domain(format!("common-mode phase variance is negative ({var:e})")));
    }
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuanSimon {
    pub sum: f64,
    pub entangled: bool,
}

/// Separable states satisfy `ΔQ₋² + Δ(Q₊^{π/2})² ≥ 2`.
pub fn duan_simon(var_minus: f64, var_plus_orth: f64) -> DuanSimon {
    let sum = var_minus + var_plus_orth;
    DuanSimon {
        sum,
        entangled: sum < 2.0,
    }
}

/// Single-mode variances and cross-correlations of the detected signal and
/// idler quadratures, in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceModel {
    pub eta_s: f64,
    pub eta_i: f64,
    pub vx_s: f64,
    pub vx_i: f64,
    /// `⟨x_s x_i⟩`; positive for the two-mode squeezed state.
    pub c_x: f64,
    pub vp_s: f64,
    pub vp_i: f64,
    /// `⟨p_s p_i⟩`; the negative of `c_x`.
    pub c_p: f64,
}

impl CovarianceModel {
    /// Uncorrelated vacuum on both arms.
    pub fn vacuum() -> Self {
        Self {
            eta_s: 1.0,
            eta_i: 1.0,
            vx_s: 1.0,
            vx_i: 1.0,
            c_x: 0.0,
            vp_s: 1.0,
            vp_i: 1.0,
            c_p: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_efficiency("eta_s", self.eta_s)?;
        check_efficiency("eta_i", self.eta_i)?;
        let tol = 1e-12;
        for (v, eta, name) in [
            (self.vx_s, self.eta_s, "vx_s"),
            (self.vx_i, self.eta_i, "vx_i"),
            (self.vp_s, self.eta_s, "vp_s"),
            (self.vp_i, self.eta_i, "vp_i"),
        ] {
            if !(v >= 1.0 - eta - tol) {
                return Err(Error::domain(format!("{name} = {v} below the loss floor 1 − η = {}", 1.0 - eta)));
            }
        }
        for (c, a, b, name) in [
            (self.c_x, self.vx_s, self.vx_i, "c_x"),
            (self.c_p, self.vp_s, self.vp_i, "c_p"),
        ] {
            if c * c > a * b * (1.0 + tol) {
                return Err(Error::domain(format!("{name} violates |c| <= sqrt(v_s v_i)")));
            }
        }
        Ok(())
    }

    fn sector(&self, sector: Sector) -> (f64, f64, f64) {
        match sector {
            Sector::Amplitude => (self.vx_s, self.vx_i, self.c_x),
            Sector::Orthogonal => (self.vp_s, self.vp_i, self.c_p),
        }
    }
}

/// Lossless two-mode squeezed covariance sent through independent
/// beam-splitter losses `η_s`, `η_i`.
pub fn build_covariance_model(epsilon: f64, eta_s: f64, eta_i: f64, omega_norm: f64) -> Result<CovarianceModel> {
    check_efficiency("eta_s", eta_s)?;
    check_efficiency("eta_i", eta_i)?;
    let v_minus = two_mode_variance(epsilon, 1.0, omega_norm, Sign::Minus, SpectrumVariant::Corrected)?;
    let v_plus = two_mode_variance(epsilon, 1.0, omega_norm, Sign::Plus, SpectrumVariant::Corrected)?;
    let v = 0.5 * (v_plus + v_minus);
    let c = 0.5 * (v_plus - v_minus);
    let c_x = (eta_s * eta_i).sqrt() * c;
    let model = CovarianceModel {
        eta_s,
        eta_i,
        vx_s: 1.0 + eta_s * (v - 1.0),
        vx_i: 1.0 + eta_i * (v - 1.0),
        c_x,
        vp_s: 1.0 + eta_s * (v - 1.0),
        vp_i: 1.0 + eta_i * (v - 1.0),
        c_p: -c_x,
    };
    model.validate()?;
    Ok(model)
}

/// `Var[(q_s ± g q_i)/√2]` normalized to the shot noise of the same
/// combination, on the setpoint quadratures.
pub fn weighted_variance(model: &CovarianceModel, g: f64, sign: Sign) -> f64 {
    weighted_variance_in(model, Sector::Amplitude, g, sign)
}

pub fn weighted_variance_in(model: &CovarianceModel, sector: Sector, g: f64, sign: Sign) -> f64 {
    let (a, b, c) = model.sector(sector);
    (a + g * g * b + 2.0 * sign.factor() * g * c) / (1.0 + g * g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombinationOptimum {
    pub g_star: f64,
    pub var_star: f64,
    /// Minimizer found by golden-section search over `log g`.
    pub g_search: f64,
    /// The sector carries no correlation; `g_star` is set to 1.
    pub no_correlation: bool,
    /// The minimum sits on the edge of the searched `g` range.
    pub at_boundary: bool,
}

/// Minimizes [`weighted_variance`] over `g > 0`.
///
/// `f(g)` is the Rayleigh quotient of `[[a, ±c], [±c, b]]` along `(1, g)`, so
/// its stationary points solve `±c g² − (b − a) g ∓ c = 0`. When `±c < 0` the
/// positive root is the global minimizer; otherwise the infimum over `g > 0`
/// lies at an end of [`WEIGHT_SEARCH_RANGE`].
pub fn optimize_combination(model: &CovarianceModel, sign: Sign) -> CombinationOptimum {
    optimize_combination_in(model, Sector::Amplitude, sign)
}

pub fn optimize_combination_in(model: &CovarianceModel, sector: Sector, sign: Sign) -> CombinationOptimum {
    let (a, b, c) = model.sector(sector);
    let f = |g: f64| weighted_variance_in(model, sector, g, sign);
    let search = golden_section(
        |lg: f64| f(lg.exp()),
        WEIGHT_SEARCH_RANGE.0.ln(),
        WEIGHT_SEARCH_RANGE.1.ln(),
        SEARCH_TOL,
    );
    let g_search = search.x.exp();

    let sc = sign.factor() * c;
    if sc == 0.0 {
        return CombinationOptimum {
            g_star: 1.0,
            var_star: f(1.0),
            g_search,
            no_correlation: true,
            at_boundary: false,
        };
    }
    if sc < 0.0 {
        let disc = ((b - a) * (b - a) + 4.0 * c * c).sqrt();
        let g = -2.0 * sc / ((b - a) + disc);
        return CombinationOptimum {
            g_star: g,
            var_star: f(g),
            g_search,
            no_correlation: false,
            at_boundary: false,
        };
    }
    let (lo, hi) = WEIGHT_SEARCH_RANGE;
    let g = if f(lo) <= f(hi) { lo } else { hi };
    CombinationOptimum {
        g_star: g,
        var_star: f(g),
        g_search,
        no_correlation: false,
        at_boundary: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpOptimum {
    pub eps_opt: f64,
    pub var_min: f64,
}

/// Pump amplitude minimizing the phase-noise-degraded squeezing at `Ω'`,
/// searched on `[0, 0.99]`.
pub fn optimal_epsilon(eta: f64, sigma_theta: f64, omega_norm: f64) -> Result<PumpOptimum> {
    optimal_epsilon_with(eta, sigma_theta, omega_norm, PhaseNoiseMode::SmallAngle)
}

pub fn optimal_epsilon_with(eta: f64, sigma_theta: f64, omega_norm: f64, mode: PhaseNoiseMode) -> Result<PumpOptimum> {
    check_efficiency("eta", eta)?;
    // Validates sigma and omega once so the objective can unwrap.
    degraded_squeezing(0.5, eta, sigma_theta, omega_norm, mode)?;
    let m = golden_section(
        |eps| degraded_squeezing(eps, eta, sigma_theta, omega_norm, mode).unwrap_or(f64::INFINITY),
        0.0,
        EPSILON_SEARCH_MAX,
        SEARCH_TOL,
    );
    Ok(PumpOptimum {
        eps_opt: m.x,
        var_min: m.value,
    })
}

/// Squeezed-branch variance after phase-noise mixing with its orthogonal
/// (anti-squeezed) partner.
pub fn degraded_squeezing(epsilon: f64, eta: f64, sigma_theta: f64, omega_norm: f64, mode: PhaseNoiseMode) -> Result<f64> {
    degraded_variance(epsilon, eta, sigma_theta, omega_norm, Sign::Minus, mode)
}

/// `ΔQ±,pn²` from the corrected spectrum composed with the phase-noise model.
pub fn degraded_variance(
    epsilon: f64,
    eta: f64,
    sigma_theta: f64,
    omega_norm: f64,
    sign: Sign,
    mode: PhaseNoiseMode,
) -> Result<f64> {
    let p = spectrum_point(epsilon, eta, omega_norm, SpectrumVariant::Corrected)?;
    let ideal = match sign {
        Sign::Minus => p.var_minus,
        Sign::Plus => p.var_plus,
    };
    let orth = orthogonal_variance(p.var_plus, p.var_minus, sign);
    phase_noise_variance(ideal, orth, sigma_theta, mode)
}
