use std::path::Path;

use epr_core::estimation::Window;
use epr_core::locksim::{CalibrationMethod, Disturbances, LoopConfig};
use epr_core::model::SystemConfig;
use epr_core::nopo::ClosedFormVariant;
use epr_core::pipeline::{Fig3Config, Fig4Config, Fig5Config};
use epr_core::spectra::{PhaseNoiseMode, SpectrumVariant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Seed used when neither the config nor `--seed` sets one.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyStateMethod {
    #[default]
    LinearSolve,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyStateBlock {
    pub method: SteadyStateMethod,
    pub variant: ClosedFormVariant,
}

impl Default for SteadyStateBlock {
    fn default() -> Self {
        Self {
            method: SteadyStateMethod::LinearSolve,
            variant: ClosedFormVariant::Corrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateBlock {
    /// End time in units of `1/γ`.
    pub t_end: f64,
    /// Step in units of `1/γ`.
    pub dt: f64,
    /// Write every n-th sample.
    pub decimate: usize,
}

impl Default for IntegrateBlock {
    fn default() -> Self {
        Self {
            t_end: 50.0,
            dt: 0.01,
            decimate: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraBlock {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub variant: SpectrumVariant,
}

impl Default for SpectraBlock {
    fn default() -> Self {
        Self {
            omega_min: 0.0,
            omega_max: 5.0,
            points: 101,
            variant: SpectrumVariant::Corrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub points: usize,
    pub omega_norm: f64,
    /// Defaults to the common mode of `system.phase_noise`.
    pub sigma_theta: Option<f64>,
    pub mode: PhaseNoiseMode,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            epsilon_min: 0.0,
            epsilon_max: 0.98,
            points: 99,
            omega_norm: 0.0,
            sigma_theta: None,
            mode: PhaseNoiseMode::SmallAngle,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuanSimonBlock {
    pub omega_norm: f64,
    /// Include phase-noise mixing from `system.phase_noise`.
    pub phase_noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LockSimBlock {
    pub duration: f64,
    pub rate: f64,
    pub loop_s: LoopConfig,
    pub loop_i: LoopConfig,
    /// Defaults to the typical acoustic and drift scenario.
    pub disturbances: Option<Disturbances>,
}

impl Default for LockSimBlock {
    fn default() -> Self {
        Self {
            duration: 0.2,
            rate: 500e3,
            loop_s: LoopConfig::default(),
            loop_i: LoopConfig::idler_default(),
            disturbances: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthEprBlock {
    pub duration: f64,
    pub rate: f64,
    /// Injected common-mode jitter; defaults to `system.phase_noise`.
    pub sigma_theta: Option<f64>,
    pub theta_corner: f64,
    pub dark_noise: bool,
}

impl Default for SynthEprBlock {
    fn default() -> Self {
        Self {
            duration: 0.5,
            rate: 200e3,
            sigma_theta: None,
            theta_corner: 2e3,
            dark_noise: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateBlock {
    pub method: CalibrationMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsdBlock {
    /// Column to analyze; defaults to the first column other than `t`.
    pub column: Option<String>,
    /// Required when the input has no `t` column.
    pub sample_rate: Option<f64>,
    pub segment_length: Option<usize>,
    pub overlap: f64,
    pub window: Window,
}

impl Default for PsdBlock {
    fn default() -> Self {
        Self {
            column: None,
            sample_rate: None,
            segment_length: None,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitBlock {
    pub omega_norm: f64,
    pub mode: PhaseNoiseMode,
    pub sigma_max: f64,
    pub bootstrap_resamples: usize,
}

impl Default for FitBlock {
    fn default() -> Self {
        Self {
            omega_norm: 0.0,
            mode: PhaseNoiseMode::SmallAngle,
            sigma_max: 0.5,
            bootstrap_resamples: 200,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproduceBlock {
    pub fig3: Fig3Config,
    pub fig4: Fig4Config,
    pub fig5: Fig5Config,
}

/// Everything a run needs. Unset blocks take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rng_seed: u64,
    pub system: SystemConfig,
    pub steady_state: SteadyStateBlock,
    pub integrate: IntegrateBlock,
    pub spectra: SpectraBlock,
    pub sweep: SweepBlock,
    pub duan_simon: DuanSimonBlock,
    pub lock_sim: LockSimBlock,
    pub synth_epr: SynthEprBlock,
    pub calibrate: CalibrateBlock,
    pub psd: PsdBlock,
    pub fit: FitBlock,
    pub reproduce: ReproduceBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rng_seed: DEFAULT_SEED,
            system: SystemConfig::default(),
            steady_state: SteadyStateBlock::default(),
            integrate: IntegrateBlock::default(),
            spectra: SpectraBlock::default(),
            sweep: SweepBlock::default(),
            duan_simon: DuanSimonBlock::default(),
            lock_sim: LockSimBlock::default(),
            synth_epr: SynthEprBlock::default(),
            calibrate: CalibrateBlock::default(),
            psd: PsdBlock::default(),
            fit: FitBlock::default(),
            reproduce: ReproduceBlock::default(),
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies one `key.path=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not of the form key=value")))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override `{spec}` has an empty key segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for key in path.split('.') {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        node = node
            .as_object_mut()
            .expect("just made an object")
            .entry(key.to_string())
            .or_insert(Value::Null);
    }
    merge(node, value);
    Ok(())
}

/// Defaults, then the config file, then `--set` overrides, then `--seed`.
pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut root = serde_json::to_value(RunConfig::default()).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {} is not valid JSON: {e}", path.display())))?;
        if !file.is_object() {
            return Err(CliError::Config("config root must be a JSON object".into()));
        }
        merge(&mut root, file);
    }
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let mut cfg: RunConfig = serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    cfg.system.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = load(None, &[], None).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = load(
            None,
            &[
                "system.pump.epsilon=0.5".into(),
                "spectra.variant=literal".into(),
                "lock_sim.loop_s.kp=0.2".into(),
            ],
            Some(7),
        )
        .unwrap();
        assert_eq!(cfg.system.pump.epsilon, 0.5);
        assert_eq!(cfg.spectra.variant, SpectrumVariant::Literal);
        assert_eq!(cfg.lock_sim.loop_s.kp, 0.2);
        assert_eq!(cfg.system.cavity, Default::default());
        assert_eq!(cfg.rng_seed, 7);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(load(None, &["system.pump.epsilom=0.5".into()], None).is_err());
        assert!(load(None, &["nonsense".into()], None).is_err());
    }

    #[test]
    fn above_threshold_is_a_domain_error() {
        let e = load(None, &["system.pump.epsilon=1.2".into()], None).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }
}
