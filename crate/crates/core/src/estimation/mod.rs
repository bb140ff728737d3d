//! Spectral estimation, error-signal calibration and model fitting.

mod fit;
mod welch;

pub use fit::{
    fit_phase_noise_model, fit_phase_noise_model_with, synthetic_dataset, FitOptions, FitResult,
    SqueezingDataset, SqueezingPoint, SIGMA_BOUNDARY,
};
pub use welch::{
    band_power, default_segment_length, integrate_psd, welch_psd, welch_psd_default, PsdEstimate, Window,
    MAX_DEFAULT_SEGMENT,
};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Converts an error-signal trace to radians using the small-angle slope `β`.
pub fn apply_calibration(series: &TimeSeries, beta: f64) -> Result<TimeSeries> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("calibration factor must be > 0, got {beta}")));
    }
    TimeSeries::new(
        series.sample_rate,
        series.samples.iter().map(|x| x * beta).collect(),
        "rad",
    )
}
