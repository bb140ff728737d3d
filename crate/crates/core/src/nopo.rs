//! Classical dynamics of the seeded NOPO and the coherent-lock fields it emits.
//!
//! Intracavity amplitudes follow
//!
//! ```text
//! α̇_s = −(γ − iΔ) α_s + G α_i* + √(2γ_in) α_CL
//! α̇_i = −(γ + iΔ) α_i + G α_s*
//! ```
//!
//! with `Δ_s = −Δ_i = Δ` and complex coupling `G = ε γ e^{iφ_p}`. Output
//! fields are `A = √(2γ_out) α`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CavityParams, ComplexAmp, PumpParams, SeedParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Amplitude blow-up factor (relative to the input scale) treated as
/// evidence of above-threshold growth.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Output amplitudes and phases of the two coherent locking fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LockFieldState {
    pub a_cls: ComplexAmp,
    pub a_cli: ComplexAmp,
    pub phi_cls: f64,
    pub phi_cli: f64,
}

impl LockFieldState {
    pub fn from_amplitudes(a_cls: ComplexAmp, a_cli: ComplexAmp) -> Self {
        Self {
            a_cls,
            a_cli,
            phi_cls: a_cls.arg(),
            phi_cli: a_cli.arg(),
        }
    }
}

/// Which transcription of the closed-form output amplitudes to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosedFormVariant {
    /// Uncorrected denominators: `ε²/(1+Δ')` in the imaginary part of
    /// the signal denominator, `1 − iΔ'` in the idler prefactor.
    Literal,
    /// Consistent with the steady state of the equations of motion:
    /// `ε²/(1+Δ'²)` in both places, `1 + iΔ'` in the idler prefactor.
    #[default]
    Corrected,
}

/// Intracavity signal/idler trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub alpha_s: Vec<ComplexAmp>,
    pub alpha_i: Vec<ComplexAmp>,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, ComplexAmp, ComplexAmp)> {
        let n = self.times.len();
        (n > 0).then(|| (self.times[n - 1], self.alpha_s[n - 1], self.alpha_i[n - 1]))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Complex coupling `G = ε γ e^{iφ_p}`.
pub fn coupling(cavity: &CavityParams, pump: &PumpParams) -> Complex64 {
    Complex64::from_polar(pump.epsilon * cavity.gamma_total(), pump.phi_p)
}

/// Largest real part of the drift-matrix eigenvalues, `γ(ε − 1)`.
///
/// The linear system in `(α_s, α_i*)` has drift
/// `[[−(γ−iΔ), G], [G*, −(γ−iΔ)]]` with eigenvalues `−(γ−iΔ) ± |G|`.
pub fn max_growth_rate(cavity: &CavityParams, pump: &PumpParams) -> f64 {
    // Computed from trace and determinant rather than the closed form above.
    let a = -(cavity.gamma_total() - I * cavity.delta);
    let g = coupling(cavity, pump);
    let trace = a + a;
    let det = a * a - g * g.conj();
    let disc = (trace * trace - 4.0 * det).sqrt();
    let l1 = (trace + disc) / 2.0;
    let l2 = (trace - disc) / 2.0;
    l1.re.max(l2.re)
}

/// Amplitude gain `1/(1 − ε)` of the seeded amplifier on resonance.
pub fn parametric_gain(epsilon: f64) -> Result<f64> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if epsilon >= 1.0 {
        return Err(Error::AboveThreshold(epsilon));
    }
    Ok(1.0 / (1.0 - epsilon))
}

fn check_inputs(cavity: &CavityParams, pump: &PumpParams, seed: &SeedParams) -> Result<()> {
    cavity.validate()?;
    seed.validate()?;
    pump.validate()
}

fn drive(cavity: &CavityParams, seed: &SeedParams) -> Complex64 {
    (2.0 * cavity.gamma_in).sqrt() * seed.complex_amplitude()
}

/// Steady state obtained by solving the 2×2 complex linear system
///
/// ```text
/// (γ − iΔ) α_s −  G  α_i* = √(2γ_in) α_CL
///   −G*    α_s + (γ − iΔ) α_i* = 0
/// ```
pub fn steady_state_linear_solve(
    cavity: &CavityParams,
    pump: &PumpParams,
    seed: &SeedParams,
) -> Result<LockFieldState> {
    check_inputs(cavity, pump, seed)?;
    let gamma = cavity.gamma_total();
    let g = coupling(cavity, pump);
    let diag = gamma - I * cavity.delta;
    let m = [[diag, -g], [-g.conj(), diag]];
    let rhs = [drive(cavity, seed), Complex64::new(0.0, 0.0)];

    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = diag.norm_sqr().max(g.norm_sqr());
    if !(det.norm() > 1e-12 * scale) {
        return Err(Error::Numerical(format!(
            "steady-state system is singular (|det| = {:e})",
            det.norm()
        )));
    }
    let alpha_s = (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det;
    let alpha_i_conj = (m[0][0] * rhs[1] - rhs[0] * m[1][0]) / det;

    let out = (2.0 * cavity.gamma_out).sqrt();
    Ok(LockFieldState::from_amplitudes(
        out * alpha_s,
        out * alpha_i_conj.conj(),
    ))
}

/// Closed-form output amplitudes of the lock fields.
pub fn steady_state_closed_form(
    cavity: &CavityParams,
    pump: &PumpParams,
    seed: &SeedParams,
    variant: ClosedFormVariant,
) -> Result<LockFieldState> {
    check_inputs(cavity, pump, seed)?;
    let gamma = cavity.gamma_total();
    let dn = cavity.normalized_detuning();
    let eps = pump.epsilon;
    let eps2 = eps * eps;
    let prefactor = 2.0 * (cavity.gamma_in * cavity.gamma_out).sqrt() / gamma;

    let lorentz = 1.0 + dn * dn;
    let (imag_sub, idler_den) = match variant {
        ClosedFormVariant::Corrected => (eps2 / lorentz, 1.0 + I * dn),
        ClosedFormVariant::Literal => (eps2 / (1.0 + dn), 1.0 - I * dn),
    };
    let den = Complex64::new(1.0 - eps2 / lorentz, -dn * (1.0 + imag_sub));
    if !(den.norm() > 1e-12) {
        return Err(Error::Numerical("closed-form denominator vanishes".into()));
    }
    let a_cls = prefactor * seed.complex_amplitude() / den;
    let a_cli = Complex64::from_polar(eps, pump.phi_p) / idler_den * a_cls.conj();
    Ok(LockFieldState::from_amplitudes(a_cls, a_cli))
}

/// Constant phase offset of `φ_CLs + φ_CLi − φ_p` introduced by detuning,
/// `arg(1/(1 + iΔ'))`.
pub fn detuning_phase_offset(normalized_detuning: f64) -> f64 {
    -normalized_detuning.atan()
}

/// Fixed-step RK4 integration of the equations of motion.
///
/// `dt` must not exceed `0.1/γ`; the actual step is shrunk slightly so the
/// last sample lands exactly on `t_end`. Growth beyond
/// [`DIVERGENCE_FACTOR`] times the input scale aborts with
/// [`Error::Diverged`]; a run that finishes with a positive drift eigenvalue
/// is rejected with [`Error::AboveThreshold`].
pub fn integrate_dynamics(
    cavity: &CavityParams,
    pump: &PumpParams,
    seed: &SeedParams,
    t_end: f64,
    dt: f64,
    initial: (ComplexAmp, ComplexAmp),
) -> Result<Trajectory> {
    cavity.validate()?;
    seed.validate()?;
    if !pump.epsilon.is_finite() || pump.epsilon < 0.0 || !pump.phi_p.is_finite() {
        return Err(Error::invalid("pump parameters must be finite with epsilon >= 0"));
    }
    let gamma = cavity.gamma_total();
    if !(dt > 0.0) || dt > 0.1 / gamma * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "dt = {dt:e} s must lie in (0, 0.1/gamma = {:e} s]",
            0.1 / gamma
        )));
    }
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(Error::invalid("t_end must be finite and >= dt"));
    }

    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let g = coupling(cavity, pump);
    let drive = drive(cavity, seed);
    let ks = -(gamma - I * cavity.delta);
    let ki = -(gamma + I * cavity.delta);
    let rhs = |s: Complex64, i: Complex64| (ks * s + g * i.conj() + drive, ki * i + g * s.conj());

    let input_scale = (drive.norm() / gamma)
        .max(initial.0.norm())
        .max(initial.1.norm())
        .max(f64::MIN_POSITIVE);
    let limit = DIVERGENCE_FACTOR * input_scale;

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        alpha_s: Vec::with_capacity(steps + 1),
        alpha_i: Vec::with_capacity(steps + 1),
    };
    let (mut s, mut i) = initial;
    traj.times.push(0.0);
    traj.alpha_s.push(s);
    traj.alpha_i.push(i);
    for n in 1..=steps {
        let (k1s, k1i) = rhs(s, i);
        let (k2s, k2i) = rhs(s + 0.5 * h * k1s, i + 0.5 * h * k1i);
        let (k3s, k3i) = rhs(s + 0.5 * h * k2s, i + 0.5 * h * k2i);
        let (k4s, k4i) = rhs(s + h * k3s, i + h * k3i);
        s += h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        i += h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
        let t = n as f64 * h;
        if !(s.norm() <= limit && i.norm() <= limit) {
            return Err(Error::Diverged {
                epsilon: pump.epsilon,
                time: t,
            });
        }
        traj.times.push(t);
        traj.alpha_s.push(s);
        traj.alpha_i.push(i);
    }

    if max_growth_rate(cavity, pump) >= 0.0 {
        return Err(Error::AboveThreshold(pump.epsilon));
    }
    Ok(traj)
}

/// Converts intracavity amplitudes to output lock fields.
pub fn output_fields(cavity: &CavityParams, alpha_s: ComplexAmp, alpha_i: ComplexAmp) -> LockFieldState {
    let out = (2.0 * cavity.gamma_out).sqrt();
    LockFieldState::from_amplitudes(out * alpha_s, out * alpha_i)
}
