use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// STFT framing parameters. The defaults give 16 ms frames with 8 ms hop at
/// 16 kHz and 129 frequency bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig { window_len: 256, hop: 128, fft_size: 256 }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidConfig(format!("window length {} < 2", self.window_len)));
        }
        if !self.window_len.is_multiple_of(2) || self.hop * 2 != self.window_len {
            return Err(Error::InvalidConfig(format!(
                "hop {} must be half the window length {}",
                self.hop, self.window_len
            )));
        }
        if self.fft_size != self.window_len {
            return Err(Error::InvalidConfig(format!(
                "fft size {} must equal window length {}",
                self.fft_size, self.window_len
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of complete frames for a signal of `len` samples (no padding).
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    /// Length of the signal reconstructed from `frames` frames.
    pub fn synthesis_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.window_len
        }
    }
}

/// Periodic Hamming window, `0.54 - 0.46 cos(2 pi n / len)`.
pub fn hamming_window(len: usize) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::InvalidConfig(format!("window length {len} < 2")));
    }
    Ok((0..len).map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos()).collect())
}

/// Complex STFT coefficients, shape `(bins, frames)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub data: Array2<Complex64>,
    pub config: StftConfig,
}

impl ComplexSpectrogram {
    pub fn num_bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Periodogram `|Y(k,l)|^2`.
    pub fn power(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm_sqr())
    }

    pub fn zeros(config: StftConfig, frames: usize) -> Self {
        ComplexSpectrogram { data: Array2::zeros((config.num_bins(), frames)), config }
    }
}

/// Reusable analysis/synthesis engine holding the window and FFT plans.
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("config", &self.config).finish()
    }
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let window = hamming_window(config.window_len)?;
        let mut planner = FftPlanner::new();
        Ok(Stft {
            config,
            window,
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
        })
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn analyze(&self, audio: &AudioBuffer) -> Result<ComplexSpectrogram> {
        let cfg = self.config;
        let n = audio.samples.len();
        if n < cfg.window_len {
            return Err(Error::TooShort { min: cfg.window_len, got: n });
        }
        let frames = cfg.num_frames(n);
        let bins = cfg.num_bins();
        let mut out = Array2::zeros((bins, frames));
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
        for l in 0..frames {
            let start = l * cfg.hop;
            let seg = &audio.samples[start..start + cfg.window_len];
            for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new(s * w, 0.0);
            }
            self.forward.process(&mut buf);
            for k in 0..bins {
                out[(k, l)] = buf[k];
            }
        }
        Ok(ComplexSpectrogram { data: out, config: cfg })
    }

    /// Inverse FFT of one half-spectrum frame into `frame` (length fft_size).
    fn synthesize_frame(&self, bins: ArrayView1<Complex64>, buf: &mut [Complex64], frame: &mut [f64]) {
        let n = self.config.fft_size;
        let half = n / 2;
        buf[0] = Complex64::new(bins[0].re, 0.0);
        for k in 1..half {
            buf[k] = bins[k];
            buf[n - k] = bins[k].conj();
        }
        buf[half] = Complex64::new(bins[half].re, 0.0);
        self.inverse.process(buf);
        let scale = 1.0 / n as f64;
        for (f, b) in frame.iter_mut().zip(buf.iter()) {
            *f = b.re * scale;
        }
    }

    /// Weighted overlap-add with the analysis window as synthesis window,
    /// normalized by the summed squared-window envelope.
    pub fn synthesize(&self, spec: &ComplexSpectrogram) -> Result<AudioBuffer> {
        let cfg = self.config;
        if spec.config != cfg {
            return Err(Error::InvalidConfig("spectrogram was produced with a different STFT config".into()));
        }
        if spec.num_bins() != cfg.num_bins() {
            return Err(Error::Shape(format!("spectrogram has {} bins, expected {}", spec.num_bins(), cfg.num_bins())));
        }
        let frames = spec.num_frames();
        let len = cfg.synthesis_len(frames);
        let mut out = vec![0.0; len];
        let mut envelope = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
        let mut frame = vec![0.0; cfg.fft_size];
        for l in 0..frames {
            self.synthesize_frame(spec.data.column(l), &mut buf, &mut frame);
            let start = l * cfg.hop;
            for (i, (&f, &w)) in frame.iter().zip(&self.window).enumerate() {
                out[start + i] += f * w;
                envelope[start + i] += w * w;
            }
        }
        for (o, e) in out.iter_mut().zip(&envelope) {
            *o /= e;
        }
        Ok(AudioBuffer::new(out))
    }
}

pub fn stft(audio: &AudioBuffer, config: StftConfig) -> Result<ComplexSpectrogram> {
    Stft::new(config)?.analyze(audio)
}

pub fn istft(spec: &ComplexSpectrogram) -> Result<AudioBuffer> {
    Stft::new(spec.config)?.synthesize(spec)
}
