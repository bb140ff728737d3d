//! Simulation and analysis toolkit for coherent phase control of a
//! two-color continuous-variable entanglement source.
//!
//! * [`model`]: shared parameter types and unit conventions.
//! * [`nopo`]: classical seeded-NOPO dynamics and lock-field amplitudes.
//! * [`spectra`]: squeezing spectra, phase-noise mixing and the Duan–Simon
//!   criterion.
//! * [`locksim`]: homodyne phase-lock simulation and synthetic photocurrents.
//! * [`estimation`]: Welch PSDs, calibration and model fitting.
//! * [`pipeline`]: canned end-to-end scenarios.

pub mod error;
pub mod estimation;
pub mod locksim;
pub mod model;
pub mod nopo;
pub mod optim;
pub mod pipeline;
pub mod series;
pub mod spectra;

pub use error::{Error, ErrorKind, Result};
pub use series::TimeSeries;
