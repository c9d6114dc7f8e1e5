use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ComplexSpectrogram;
use crate::error::{Error, Result};

/// Power floor applied before taking the log.
pub const DEFAULT_POWER_FLOOR: f64 = 1e-12;

/// Global scalar normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        let stats = NormStats { mean, std };
        stats.validate()?;
        Ok(stats)
    }

    pub fn identity() -> Self {
        NormStats { mean: 0.0, std: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0) || !self.std.is_finite() || !self.mean.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "normalization stats need finite mean and std > 0 (got mean {}, std {})",
                self.mean, self.std
            )));
        }
        Ok(())
    }

    /// Mean and population standard deviation over every entry of every
    /// feature matrix.
    pub fn from_features<'a, I>(features: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a LogPowerFeatures>,
    {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for f in features {
            for &v in f.data.iter() {
                n += 1;
                sum += v;
                sum_sq += v * v;
            }
        }
        if n == 0 {
            return Err(Error::InvalidConfig("no features to compute statistics from".into()));
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        Self::new(mean, var.sqrt().max(1e-12))
    }
}

/// Log-power matrix, shape `(bins, frames)`. `normalized_with` records the
/// statistics applied by [`normalize`], if any.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPowerFeatures {
    pub data: Array2<f64>,
    pub normalized_with: Option<NormStats>,
}

impl LogPowerFeatures {
    pub fn raw(data: Array2<f64>) -> Self {
        LogPowerFeatures { data, normalized_with: None }
    }

    pub fn num_bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.data.ncols()
    }
}

/// `ln(max(|Y|^2, floor))` per bin.
pub fn log_power(spec: &ComplexSpectrogram, floor: f64) -> Result<LogPowerFeatures> {
    if !(floor > 0.0) {
        return Err(Error::InvalidConfig(format!("power floor must be > 0, got {floor}")));
    }
    Ok(LogPowerFeatures::raw(spec.data.mapv(|c| c.norm_sqr().max(floor).ln())))
}

pub fn normalize(features: &LogPowerFeatures, stats: NormStats) -> Result<LogPowerFeatures> {
    stats.validate()?;
    if features.normalized_with.is_some() {
        return Err(Error::InvalidConfig("features are already normalized".into()));
    }
    Ok(LogPowerFeatures { data: features.data.mapv(|x| (x - stats.mean) / stats.std), normalized_with: Some(stats) })
}
