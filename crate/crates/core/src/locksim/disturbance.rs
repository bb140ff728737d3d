use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    /// Hz.
    pub frequency: f64,
    /// rad.
    pub amplitude: f64,
    /// rad.
    #[serde(default)]
    pub phase: f64,
}

/// Optical path-length disturbance acting on one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSpec {
    /// Random-walk diffusion constant `D` (rad²/s): increment variance `D·dt`.
    pub random_walk_diffusion: f64,
    /// One-sided white phase-noise density (rad²/Hz).
    pub white_noise_density: f64,
    pub sinusoids: Vec<Sinusoid>,
    /// Constant offset (rad).
    pub offset: f64,
    /// Deterministic ramp rate (rad/s).
    pub linear_drift: f64,
    pub rng_seed: u64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self::quiet(0)
    }
}

impl DisturbanceSpec {
    /// No disturbance at all.
    pub fn quiet(rng_seed: u64) -> Self {
        Self {
            random_walk_diffusion: 0.0,
            white_noise_density: 0.0,
            sinusoids: Vec::new(),
            offset: 0.0,
            linear_drift: 0.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.random_walk_diffusion >= 0.0) || !self.random_walk_diffusion.is_finite() {
            return Err(Error::invalid("random_walk_diffusion must be >= 0"));
        }
        if !(self.white_noise_density >= 0.0) || !self.white_noise_density.is_finite() {
            return Err(Error::invalid("white_noise_density must be >= 0"));
        }
        if !self.offset.is_finite() || !self.linear_drift.is_finite() {
            return Err(Error::invalid("offset and linear_drift must be finite"));
        }
        for s in &self.sinusoids {
            if !(s.frequency >= 0.0) || !s.amplitude.is_finite() || !s.phase.is_finite() {
                return Err(Error::invalid("sinusoid parameters must be finite with frequency >= 0"));
            }
        }
        Ok(())
    }
}

/// Samples the disturbance at `rate` for `duration` seconds.
///
/// Random-walk and white components draw from separate ChaCha streams of the
/// same seed, so enabling one does not perturb the other.
pub fn synth_disturbance(spec: &DisturbanceSpec, duration: f64, rate: f64) -> Result<TimeSeries> {
    spec.validate()?;
    if !(rate > 0.0) || !(duration > 0.0) {
        return Err(Error::invalid("duration and rate must be > 0"));
    }
    let n = (duration * rate).round();
    if n < 2.0 {
        return Err(Error::invalid("duration * rate must be >= 2"));
    }
    let n = n as usize;
    let dt = 1.0 / rate;
    let mut out = vec![spec.offset; n];

    if spec.linear_drift != 0.0 {
        for (k, x) in out.iter_mut().enumerate() {
            *x += spec.linear_drift * k as f64 * dt;
        }
    }
    if spec.random_walk_diffusion > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        rng.set_stream(1);
        let step = (spec.random_walk_diffusion * dt).sqrt();
        let mut walk = 0.0;
        for x in out.iter_mut().skip(1) {
            let z: f64 = StandardNormal.sample(&mut rng);
            walk += step * z;
            *x += walk;
        }
    }
    if spec.white_noise_density > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        rng.set_stream(2);
        let sd = (spec.white_noise_density * rate / 2.0).sqrt();
        for x in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += sd * z;
        }
    }
    for s in &spec.sinusoids {
        for (k, x) in out.iter_mut().enumerate() {
            *x += s.amplitude * (TAU * s.frequency * k as f64 * dt + s.phase).sin();
        }
    }
    TimeSeries::new(rate, out, "rad")
}
