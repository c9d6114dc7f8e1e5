//! Signal front end: audio buffers, STFT analysis/synthesis, log-power
//! features and feature normalization.

mod features;
mod stft;
pub mod wav;

pub use features::{log_power, normalize, LogPowerFeatures, NormStats, DEFAULT_POWER_FLOOR};
pub use stft::{hamming_window, istft, stft, ComplexSpectrogram, Stft, StftConfig};
pub use wav::{read_wav, write_wav, WavEncoding};

use crate::error::{Error, Result};

/// The only sample rate accepted by the pipeline entry points.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono audio at [`SAMPLE_RATE`].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>) -> Self {
        AudioBuffer { samples, sample_rate: SAMPLE_RATE }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Mean power over the whole buffer.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::UnsupportedAudio(format!(
                "sample rate {} Hz, only {} Hz is supported",
                self.sample_rate, SAMPLE_RATE
            )));
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }
}
