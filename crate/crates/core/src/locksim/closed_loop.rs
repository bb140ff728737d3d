use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::calibration::BeatSign;
use super::control::{PiController, PiezoActuator};
use super::disturbance::{synth_disturbance, DisturbanceSpec};
use super::lockin::Lockin;
use crate::error::{Error, Result};
use crate::model::wrap_phase;
use crate::nopo::LockFieldState;
use crate::series::TimeSeries;

/// Minimum ratio of sample rate to lock-in bandwidth.
pub const MIN_OVERSAMPLING: f64 = 20.0;

/// One phase-lock loop: lock-in, PI controller and piezo actuator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub kp: f64,
    /// 1/s.
    pub ki: f64,
    /// Lock-in low-pass corner (Hz).
    pub lpf_cutoff: f64,
    /// Actuator stroke (rad), symmetric.
    pub actuator_range: f64,
    /// Hz.
    pub actuator_resonance: f64,
    pub actuator_q: f64,
    /// Lock point offset (rad).
    pub theta_ref: f64,
    pub beat_sign: BeatSign,
    /// LO amplitude scaling the error signal.
    pub lo_amplitude: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            kp: 0.05,
            ki: 6.0e3,
            lpf_cutoff: 10e3,
            actuator_range: 20.0,
            actuator_resonance: 20e3,
            actuator_q: 10.0,
            theta_ref: 0.0,
            beat_sign: BeatSign::Positive,
            lo_amplitude: 1.0,
        }
    }
}

impl LoopConfig {
    /// Default loop with the opposite beat sign, for the idler arm.
    pub fn idler_default() -> Self {
        Self {
            beat_sign: BeatSign::Negative,
            ..Self::default()
        }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if !(self.lpf_cutoff > 0.0) {
            return Err(Error::invalid("lpf_cutoff must be > 0"));
        }
        if sample_rate < MIN_OVERSAMPLING * self.lpf_cutoff {
            return Err(Error::invalid(format!(
                "sample rate {sample_rate} Hz is below {MIN_OVERSAMPLING}x the lock-in bandwidth {} Hz",
                self.lpf_cutoff
            )));
        }
        if !(self.lo_amplitude > 0.0) || !self.theta_ref.is_finite() {
            return Err(Error::invalid("lo_amplitude must be > 0 and theta_ref finite"));
        }
        Ok(())
    }
}

/// The three disturbance inputs of the two-loop system.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Disturbances {
    /// Signal LO path.
    pub signal: DisturbanceSpec,
    /// Idler LO path.
    pub idler: DisturbanceSpec,
    /// Pump phase; reaches the idler control field only.
    pub pump: DisturbanceSpec,
}

impl Disturbances {
    /// Acoustic and drift levels that leave about 10 mrad of common-mode
    /// residual under the default loops.
    pub fn typical(seed: u64) -> Self {
        use super::disturbance::Sinusoid;
        let arm = |seed, f: f64, phase| DisturbanceSpec {
            random_walk_diffusion: 0.8,
            white_noise_density: 2.0e-10,
            sinusoids: vec![
                Sinusoid { frequency: f, amplitude: 0.03, phase },
                Sinusoid { frequency: 2.3 * f, amplitude: 0.01, phase: 0.0 },
            ],
            offset: 0.0,
            linear_drift: 0.0,
            rng_seed: seed,
        };
        Self {
            signal: arm(seed.wrapping_mul(3).wrapping_add(1), 310.0, 0.3),
            idler: arm(seed.wrapping_mul(3).wrapping_add(2), 470.0, 1.9),
            pump: DisturbanceSpec {
                random_walk_diffusion: 0.4,
                ..DisturbanceSpec::quiet(seed.wrapping_mul(3).wrapping_add(3))
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockRunResult {
    /// `δθ_s`, wrapped to (−π, π].
    pub residual_s: TimeSeries,
    pub residual_i: TimeSeries,
    /// `Θ = (δθ_s + δθ_i)/2`.
    pub common_mode: TimeSeries,
    pub error_s: TimeSeries,
    pub error_i: TimeSeries,
    /// Times (s) at which either controller entered saturation.
    pub saturation_events: Vec<f64>,
    /// Fraction of samples with both loops unsaturated and `|δθ| < π/2`.
    pub in_lock_fraction: f64,
    /// The residual grew over the run instead of settling.
    pub unstable: bool,
}

impl LockRunResult {
    pub fn sigma_theta(&self) -> f64 {
        rms(&self.common_mode.samples)
    }
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

struct Arm {
    lockin: Lockin,
    pi: PiController,
    actuator: PiezoActuator,
    sign: f64,
    theta_ref: f64,
    amplitude: f64,
    position: f64,
}

impl Arm {
    fn new(cfg: &LoopConfig, amp_cl: f64, phi_cl: f64, rate: f64) -> Result<Self> {
        let mut pi = PiController::new(cfg.kp, cfg.ki, cfg.actuator_range, 1.0 / rate)?;
        let mut actuator = PiezoActuator::new(cfg.actuator_resonance, cfg.actuator_q, cfg.actuator_range, rate)?;
        let sign = cfg.beat_sign.value();
        // Acquired at the undisturbed lock point before the run starts.
        let position = wrap_phase(phi_cl + sign * cfg.theta_ref);
        pi.preset(position);
        actuator.preset(position);
        let amplitude = cfg.lo_amplitude * amp_cl;
        Ok(Self {
            lockin: Lockin::new(sign * cfg.theta_ref, cfg.lpf_cutoff, rate)?,
            pi,
            actuator,
            sign,
            theta_ref: cfg.theta_ref,
            amplitude,
            position: position.clamp(-cfg.actuator_range, cfg.actuator_range),
        })
    }

    /// Returns `(residual, error, saturated)`.
    fn step(&mut self, phi_cl: f64, disturbance: f64) -> (f64, f64, bool) {
        let theta = phi_cl - (disturbance + self.position);
        let err = self.lockin.update(Complex64::from_polar(self.amplitude, theta));
        // The actuator adds to the LO phase, so a positive error must raise it.
        let command = self.pi.update(err / self.amplitude);
        self.position = self.actuator.update(command);
        let residual = wrap_phase(theta + self.sign * self.theta_ref);
        (residual, err, self.pi.saturated())
    }
}

/// Simulates both loops sample by sample.
///
/// The signal LO sees `d_s`, the idler LO sees `d_i`; the pump disturbance
/// shifts the idler control-field phase. Each loop starts locked to the
/// undisturbed lock point.
pub fn run_closed_loop(
    loop_s: &LoopConfig,
    loop_i: &LoopConfig,
    disturbances: &Disturbances,
    lock_fields: &LockFieldState,
    duration: f64,
    rate: f64,
) -> Result<LockRunResult> {
    loop_s.validate(rate)?;
    loop_i.validate(rate)?;
    if loop_s.beat_sign == loop_i.beat_sign {
        return Err(Error::invalid("signal and idler loops must use opposite beat signs"));
    }
    let amp_s = lock_fields.a_cls.norm();
    let amp_i = lock_fields.a_cli.norm();
    if !(amp_s > 0.0) || !(amp_i > 0.0) {
        return Err(Error::invalid("lock fields must have non-zero amplitude"));
    }
    let d_s = synth_disturbance(&disturbances.signal, duration, rate)?;
    let d_i = synth_disturbance(&disturbances.idler, duration, rate)?;
    let d_p = synth_disturbance(&disturbances.pump, duration, rate)?;
    let n = d_s.len();

    let mut arm_s = Arm::new(loop_s, amp_s, lock_fields.phi_cls, rate)?;
    let mut arm_i = Arm::new(loop_i, amp_i, lock_fields.phi_cli, rate)?;

    let mut res_s = Vec::with_capacity(n);
    let mut res_i = Vec::with_capacity(n);
    let mut err_s = Vec::with_capacity(n);
    let mut err_i = Vec::with_capacity(n);
    let mut events = Vec::new();
    let mut was_saturated = false;
    let mut locked = 0usize;
    for k in 0..n {
        let (rs, es, sat_s) = arm_s.step(lock_fields.phi_cls, d_s.samples[k]);
        let (ri, ei, sat_i) = arm_i.step(lock_fields.phi_cli + d_p.samples[k], d_i.samples[k]);
        let saturated = sat_s || sat_i;
        if saturated && !was_saturated {
            events.push(k as f64 / rate);
        }
        was_saturated = saturated;
        if !saturated && rs.abs() < std::f64::consts::FRAC_PI_2 && ri.abs() < std::f64::consts::FRAC_PI_2 {
            locked += 1;
        }
        res_s.push(rs);
        res_i.push(ri);
        err_s.push(es);
        err_i.push(ei);
    }
    let common: Vec<f64> = res_s.iter().zip(&res_i).map(|(a, b)| 0.5 * (a + b)).collect();
    for ((c, a), b) in common.iter().zip(&res_s).zip(&res_i) {
        if (2.0 * c - a - b).abs() > 1e-12 * (1.0 + a.abs() + b.abs()) {
            return Err(Error::Numerical("common-mode residual is not the mean of the arm residuals".into()));
        }
    }

    let quarter = (n / 4).max(1);
    let early = rms(&common[..quarter]);
    let late = rms(&common[n - quarter..]);
    let unstable = common.iter().any(|x| !x.is_finite()) || (late > 0.5 && late > 10.0 * early.max(1e-6));

    Ok(LockRunResult {
        residual_s: TimeSeries::new(rate, res_s, "rad")?,
        residual_i: TimeSeries::new(rate, res_i, "rad")?,
        common_mode: TimeSeries::new(rate, common, "rad")?,
        error_s: TimeSeries::new(rate, err_s, "signal")?,
        error_i: TimeSeries::new(rate, err_i, "signal")?,
        saturation_events: events,
        in_lock_fraction: locked as f64 / n as f64,
        unstable,
    })
}
