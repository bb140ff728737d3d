//! Phase-lock simulation: disturbances, lock-in detection, PI loops with a
//! piezo actuator, fringe calibration and synthetic EPR photocurrents.

mod calibration;
mod closed_loop;
mod control;
mod disturbance;
mod epr;
mod lockin;

pub use calibration::{calibrate_error_signal, error_signal, BeatSign, Calibration, CalibrationMethod};
pub use closed_loop::{run_closed_loop, Disturbances, LockRunResult, LoopConfig, MIN_OVERSAMPLING};
pub use control::{PiController, PiezoActuator};
pub use disturbance::{synth_disturbance, DisturbanceSpec, Sinusoid};
pub use epr::{
    band_power_rel_uncertainty, band_rms, synth_common_mode_phase, synth_epr_photocurrents, synth_shot_reference, EprPhotocurrents,
    EprSource, BAND_SEGMENT, DARK_NOISE_DB,
};
pub use lockin::{lockin_demodulate, Lockin};

pub use crate::series::TimeSeries;
