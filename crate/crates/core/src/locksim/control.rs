use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// PI controller with a symmetric output limit. While the output is clipped
/// the integrator holds its value.
#[derive(Debug, Clone)]
pub struct PiController {
    kp: f64,
    ki_dt: f64,
    limit: f64,
    integrator: f64,
    saturated: bool,
}

impl PiController {
    pub fn new(kp: f64, ki: f64, limit: f64, dt: f64) -> Result<Self> {
        if !(kp >= 0.0) || !(ki >= 0.0) || !kp.is_finite() || !ki.is_finite() {
            return Err(Error::invalid("controller gains must be finite and >= 0"));
        }
        if !(limit > 0.0) {
            return Err(Error::invalid("actuator range must be > 0"));
        }
        Ok(Self {
            kp,
            ki_dt: ki * dt,
            limit,
            integrator: 0.0,
            saturated: false,
        })
    }

    /// Presets the integrator so a zero error produces `output`.
    pub fn preset(&mut self, output: f64) {
        self.integrator = output.clamp(-self.limit, self.limit);
    }

    pub fn update(&mut self, error: f64) -> f64 {
        let candidate = self.integrator + self.ki_dt * error;
        let raw = self.kp * error + candidate;
        if raw.abs() > self.limit {
            self.saturated = true;
            raw.clamp(-self.limit, self.limit)
        } else {
            self.saturated = false;
            self.integrator = candidate;
            raw
        }
    }

    pub fn saturated(&self) -> bool {
        self.saturated
    }
}

/// Piezo actuator: second-order low-pass resonance (bilinear transform with
/// pre-warping), unity DC gain, output clipped to its stroke.
#[derive(Debug, Clone)]
pub struct PiezoActuator {
    b: [f64; 3],
    a: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
    range: f64,
}

impl PiezoActuator {
    pub fn new(resonance: f64, q: f64, range: f64, sample_rate: f64) -> Result<Self> {
        if !(resonance > 0.0) || !(resonance < sample_rate / 2.0) {
            return Err(Error::invalid(format!(
                "actuator resonance {resonance} Hz must lie below Nyquist {} Hz",
                sample_rate / 2.0
            )));
        }
        if !(q > 0.0) || !(range > 0.0) {
            return Err(Error::invalid("actuator Q and range must be > 0"));
        }
        let w0 = TAU * resonance / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Ok(Self {
            b: [b1 / 2.0, b1, b1 / 2.0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
            x: [0.0; 2],
            y: [0.0; 2],
            range,
        })
    }

    /// Sets the filter to rest at `position`.
    pub fn preset(&mut self, position: f64) {
        let p = position.clamp(-self.range, self.range);
        self.x = [p; 2];
        self.y = [p; 2];
    }

    pub fn update(&mut self, command: f64) -> f64 {
        let u = command.clamp(-self.range, self.range);
        let y = self.b[0] * u + self.b[1] * self.x[0] + self.b[2] * self.x[1]
            - self.a[0] * self.y[0]
            - self.a[1] * self.y[1];
        self.x = [u, self.x[0]];
        self.y = [y, self.y[0]];
        y.clamp(-self.range, self.range)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrator_freezes_when_clipped() {
        let mut pi = PiController::new(0.0, 1000.0, 1.0, 1e-3).unwrap();
        for _ in 0..2000 {
            pi.update(1.0);
        }
        assert!(pi.saturated());
        // Unwinds immediately once the error reverses.
        let out = pi.update(-1.0);
        assert!(out < 1.0 && !pi.saturated());
    }

    #[test]
    fn actuator_unity_dc_gain() {
        let mut act = PiezoActuator::new(20e3, 10.0, 10.0, 1e6).unwrap();
        let mut y = 0.0;
        for _ in 0..20_000 {
            y = act.update(0.7);
        }
        assert!((y - 0.7).abs() < 1e-9);
    }

    #[test]
    fn actuator_peaks_at_resonance() {
        let rate = 1e6;
        let f0 = 20e3;
        let q = 10.0;
        let mut act = PiezoActuator::new(f0, q, 100.0, rate).unwrap();
        let n = 200_000;
        let mut peak: f64 = 0.0;
        for k in 0..n {
            let y = act.update((TAU * f0 * k as f64 / rate).sin());
            if k > n / 2 {
                peak = peak.max(y.abs());
            }
        }
        assert!((peak / q - 1.0).abs() < 0.05, "{peak}");
    }

    #[test]
    fn preset_holds_position() {
        let mut act = PiezoActuator::new(20e3, 10.0, 5.0, 1e6).unwrap();
        act.preset(1.3);
        assert!((act.update(1.3) - 1.3).abs() < 1e-12);
    }
}
