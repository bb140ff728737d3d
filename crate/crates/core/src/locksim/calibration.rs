use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign of the beat note between LO and control field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum BeatSign {
    Positive,
    Negative,
}

impl BeatSign {
    pub fn value(self) -> f64 {
        match self {
            BeatSign::Positive => 1.0,
            BeatSign::Negative => -1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            BeatSign::Positive => BeatSign::Negative,
            BeatSign::Negative => BeatSign::Positive,
        }
    }
}

impl TryFrom<i8> for BeatSign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(BeatSign::Positive),
            -1 => Ok(BeatSign::Negative),
            other => Err(format!("beat sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<BeatSign> for i8 {
    fn from(s: BeatSign) -> i8 {
        match s {
            BeatSign::Positive => 1,
            BeatSign::Negative => -1,
        }
    }
}

/// Demodulated error signal `A_LO·A_CL·sin(θ + s·θ_ref)`.
pub fn error_signal(theta: f64, amp_lo: f64, amp_cl: f64, theta_ref: f64, beat_sign: BeatSign) -> f64 {
    amp_lo * amp_cl * (theta + beat_sign.value() * theta_ref).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMethod {
    /// Literal `max − min` of the scan.
    #[default]
    PeakToPeak,
    /// Least-squares fit of `a·sin θ + b·cos θ + c`; tolerant of additive noise.
    SineFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Peak-to-peak fringe amplitude.
    pub s_pp: f64,
    /// Small-angle slope in rad per signal unit: `2/S_pp`.
    pub beta: f64,
    pub method: CalibrationMethod,
}

/// Derives `β = 2/S_pp` from an error signal recorded while the phase is
/// ramped over at least one full fringe.
pub fn calibrate_error_signal(phase: &[f64], signal: &[f64], method: CalibrationMethod) -> Result<Calibration> {
    if phase.len() != signal.len() {
        return Err(Error::invalid("phase and signal lengths differ"));
    }
    if signal.len() < 3 {
        return Err(Error::invalid("fringe scan needs at least 3 samples"));
    }
    if phase.iter().chain(signal).any(|x| !x.is_finite()) {
        return Err(Error::invalid("fringe scan contains non-finite values"));
    }
    let (lo, hi) = phase
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    if hi - lo < TAU * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "fringe scan spans {:.4} rad; at least 2π is required",
            hi - lo
        )));
    }
    let s_pp = match method {
        CalibrationMethod::PeakToPeak => {
            let (lo, hi) = signal
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
            hi - lo
        }
        CalibrationMethod::SineFit => 2.0 * sine_fit_amplitude(phase, signal)?,
    };
    if !(s_pp > 0.0) {
        return Err(Error::invalid("fringe scan has zero amplitude"));
    }
    Ok(Calibration {
        s_pp,
        beta: 2.0 / s_pp,
        method,
    })
}

fn sine_fit_amplitude(phase: &[f64], signal: &[f64]) -> Result<f64> {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&p, &y) in phase.iter().zip(signal) {
        let basis = [p.sin(), p.cos(), 1.0];
        for i in 0..3 {
            r[i] += basis[i] * y;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let coef = solve3(m, r).ok_or_else(|| Error::Numerical("singular sine-fit normal equations".into()))?;
    Ok(coef[0].hypot(coef[1]))
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scan(n: usize, span: f64, amp: f64, theta_ref: f64) -> (Vec<f64>, Vec<f64>) {
        let phase: Vec<f64> = (0..n).map(|k| -PI + span * k as f64 / (n - 1) as f64).collect();
        let signal = phase
            .iter()
            .map(|&p| error_signal(p, amp, 1.0, theta_ref, BeatSign::Positive))
            .collect();
        (phase, signal)
    }

    #[test]
    fn error_signal_examples() {
        assert_eq!(error_signal(0.0, 1.0, 1.0, 0.0, BeatSign::Positive), 0.0);
        let v = error_signal(PI / 2.0, 1.0, 1.0, 0.0, BeatSign::Positive);
        assert!((v - 1.0).abs() < 1e-15);
        let v = error_signal(0.2, 1.0, 1.0, 0.3, BeatSign::Negative);
        assert!((v - (-0.1f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn unit_fringe_gives_unit_beta() {
        let (p, s) = scan(10_001, TAU, 1.0, 0.0);
        let c = calibrate_error_signal(&p, &s, CalibrationMethod::PeakToPeak).unwrap();
        assert!((c.s_pp - 2.0).abs() < 1e-6);
        assert!((c.beta - 1.0).abs() < 1e-6);
        let c = calibrate_error_signal(&p, &s, CalibrationMethod::SineFit).unwrap();
        assert!((c.beta - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reference_offset_does_not_change_beta() {
        let (p, s) = scan(10_001, TAU, 3.0, 1.1);
        let c = calibrate_error_signal(&p, &s, CalibrationMethod::SineFit).unwrap();
        assert!((c.beta - 2.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn short_scan_rejected() {
        let (p, s) = scan(1000, PI, 1.0, 0.0);
        assert!(calibrate_error_signal(&p, &s, CalibrationMethod::PeakToPeak).is_err());
    }

    #[test]
    fn beat_sign_serde() {
        let s: BeatSign = serde_json::from_str("-1").unwrap();
        assert_eq!(s, BeatSign::Negative);
        assert!(serde_json::from_str::<BeatSign>("0").is_err());
        assert_eq!(serde_json::to_string(&BeatSign::Positive).unwrap(), "1");
    }
}
