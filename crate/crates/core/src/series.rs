use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniformly sampled record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T = f64> {
    pub sample_rate: f64,
    pub samples: Vec<T>,
    /// Unit of the samples, e.g. `"rad"` or `"shot-noise units"`.
    pub label: String,
}

pub type IqSeries = TimeSeries<Complex64>;

impl<T> TimeSeries<T> {
    pub fn new(sample_rate: f64, samples: Vec<T>, label: impl Into<String>) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::invalid(format!("sample_rate must be > 0, got {sample_rate}")));
        }
        if samples.is_empty() {
            return Err(Error::invalid("time series must not be empty"));
        }
        Ok(Self {
            sample_rate,
            samples,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }
}

impl TimeSeries<f64> {
    pub fn zeros(sample_rate: f64, len: usize, label: impl Into<String>) -> Result<Self> {
        Self::new(sample_rate, vec![0.0; len], label)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population variance about the sample mean.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / self.samples.len() as f64
    }

    /// Root mean square about zero.
    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Linear interpolation onto `len` samples at `sample_rate`, holding the
    /// end values outside the original record.
    pub fn resample(&self, sample_rate: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("resampled length must be > 0"));
        }
        if sample_rate == self.sample_rate && len == self.samples.len() {
            return Ok(self.clone());
        }
        let last = self.samples.len() - 1;
        let ratio = self.sample_rate / sample_rate;
        let samples = (0..len)
            .map(|k| {
                let pos = k as f64 * ratio;
                let i = pos.floor() as usize;
                if i >= last {
                    self.samples[last]
                } else {
                    let frac = pos - i as f64;
                    self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
                }
            })
            .collect();
        Self::new(sample_rate, samples, self.label.clone())
    }
}
