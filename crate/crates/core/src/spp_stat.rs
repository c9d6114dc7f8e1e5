//! Statistical speech presence probability: complex-Gaussian hypothesis
//! likelihoods, the fixed-prior a posteriori SPP with recursive smoothing
//! and stagnation clamp, the Wiener gain, and the oracle learning target
//! built from known clean and noise spectra.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ComplexSpectrogram;

/// Below this a priori SNR the oracle target returns its limit value 0.
pub const DEFAULT_XI_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPriorParams {
    /// Fixed a priori SNR under speech presence, in dB.
    pub xi_h1_db: f64,
    /// Prior ratio p(H0)/p(H1).
    pub alpha_prior: f64,
    /// Recursive smoothing factor for the stagnation check.
    pub beta: f64,
    /// Cap applied when the smoothed SPP exceeds it.
    pub lambda_cap: f64,
}

impl Default for FixedPriorParams {
    fn default() -> Self {
        FixedPriorParams { xi_h1_db: 15.0, alpha_prior: 1.0, beta: 0.9, lambda_cap: 0.99 }
    }
}

impl FixedPriorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidConfig(format!("beta must be in (0,1), got {}", self.beta)));
        }
        if !(self.lambda_cap > 0.0 && self.lambda_cap < 1.0) {
            return Err(Error::InvalidConfig(format!("lambda must be in (0,1), got {}", self.lambda_cap)));
        }
        if !(self.alpha_prior > 0.0) || !self.alpha_prior.is_finite() {
            return Err(Error::InvalidConfig(format!("prior ratio must be > 0, got {}", self.alpha_prior)));
        }
        if !self.xi_h1_db.is_finite() {
            return Err(Error::InvalidConfig("xi_h1_db must be finite".into()));
        }
        Ok(())
    }

    pub fn xi_h1(&self) -> f64 {
        10f64.powf(self.xi_h1_db / 10.0)
    }
}

fn check_noise_psd(phi_n: f64) -> Result<()> {
    if phi_n > 0.0 && phi_n.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("noise PSD must be positive and finite, got {phi_n}")))
    }
}

/// Density of `Y` under speech absence.
pub fn likelihood_h0(y_pow: f64, phi_n: f64) -> Result<f64> {
    check_noise_psd(phi_n)?;
    Ok((-y_pow / phi_n).exp() / (PI * phi_n))
}

/// Density of `Y` under speech presence with a priori SNR `xi`.
pub fn likelihood_h1(y_pow: f64, phi_n: f64, xi: f64) -> Result<f64> {
    check_noise_psd(phi_n)?;
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("a priori SNR must be >= 0, got {xi}")));
    }
    let var = phi_n * (1.0 + xi);
    Ok((-y_pow / var).exp() / (PI * var))
}

/// A posteriori SPP for a priori SNR `xi` and prior ratio `alpha`.
pub fn posterior_spp(y_pow: f64, phi_n: f64, xi: f64, alpha: f64) -> Result<f64> {
    check_noise_psd(phi_n)?;
    let expo = -(y_pow / phi_n) * xi / (1.0 + xi);
    Ok(1.0 / (1.0 + alpha * (1.0 + xi) * expo.exp()))
}

pub fn posterior_spp_fixed_prior(y_pow: f64, phi_n: f64, params: &FixedPriorParams) -> Result<f64> {
    posterior_spp(y_pow, phi_n, params.xi_h1(), params.alpha_prior)
}

/// Recursively smoothed SPP, one entry per frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SppSmootherState {
    pub p_smoothed: Array1<f64>,
}

impl SppSmootherState {
    pub fn new(bins: usize) -> Self {
        SppSmootherState { p_smoothed: Array1::zeros(bins) }
    }
}

/// Updates the smoothed SPP with `p_raw` and caps `p_raw` at `lambda` in the
/// bins whose smoothed value exceeds `lambda`.
pub fn smooth_and_clamp(
    p_raw: ArrayView1<f64>,
    state: &mut SppSmootherState,
    params: &FixedPriorParams,
) -> Result<Array1<f64>> {
    if p_raw.len() != state.p_smoothed.len() {
        return Err(Error::Shape(format!(
            "SPP frame has {} bins, smoother has {}",
            p_raw.len(),
            state.p_smoothed.len()
        )));
    }
    let (beta, lambda) = (params.beta, params.lambda_cap);
    let mut out = Array1::zeros(p_raw.len());
    Zip::from(&mut out).and(&mut state.p_smoothed).and(&p_raw).for_each(|o, s, &p| {
        let p = p.clamp(0.0, 1.0);
        *s = beta * *s + (1.0 - beta) * p;
        *o = if *s > lambda { p.min(lambda) } else { p };
    });
    Ok(out)
}

/// `phi_x / (phi_x + phi_n)`.
pub fn wiener_gain(phi_x: f64, phi_n: f64) -> Result<f64> {
    if !(phi_x >= 0.0 && phi_n >= 0.0) || phi_x + phi_n <= 0.0 {
        return Err(Error::Domain(format!(
            "Wiener gain needs non-negative PSDs with positive sum (phi_x {phi_x}, phi_n {phi_n})"
        )));
    }
    Ok(phi_x / (phi_x + phi_n))
}

/// A posteriori SPP with the true a priori SNR `phi_x/phi_n` and the Wiener
/// gain as a priori SPP.
pub fn oracle_target_spp(y_pow: f64, phi_x: f64, phi_n: f64, xi_eps: f64) -> Result<f64> {
    check_noise_psd(phi_n)?;
    if !(phi_x >= 0.0) {
        return Err(Error::Domain(format!("speech PSD must be >= 0, got {phi_x}")));
    }
    let xi = phi_x / phi_n;
    if xi < xi_eps {
        return Ok(0.0);
    }
    let expo = -(y_pow / phi_n) * xi / (1.0 + xi);
    Ok(1.0 / (1.0 + (1.0 + 1.0 / xi) * expo.exp()))
}

/// Matrix of probabilities, shape `(bins, frames)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SppMap {
    pub data: Array2<f64>,
}

impl SppMap {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("SPP value {v} outside [0,1]")));
        }
        Ok(SppMap { data })
    }

    pub fn num_bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.data.ncols()
    }
}

/// Oracle targets from instantaneous clean and noise periodograms. Bins
/// whose noise periodogram is exactly zero are treated as noise-free: the
/// target is 1 when speech energy is present there and 0 otherwise.
pub fn target_map(
    clean: &ComplexSpectrogram,
    noise: &ComplexSpectrogram,
    noisy: &ComplexSpectrogram,
) -> Result<SppMap> {
    if clean.shape() != noise.shape() || clean.shape() != noisy.shape() {
        return Err(Error::Shape(format!(
            "clean {:?}, noise {:?}, noisy {:?}",
            clean.shape(),
            noise.shape(),
            noisy.shape()
        )));
    }
    let mut resid = 0.0;
    let mut energy = 0.0;
    Zip::from(&clean.data).and(&noise.data).and(&noisy.data).for_each(|x, n, y| {
        resid += (y - x - n).norm_sqr();
        energy += y.norm_sqr();
    });
    if resid.sqrt() > 1e-6 * energy.sqrt().max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(format!(
            "noisy spectrogram is not clean + noise (relative residual {:.3e})",
            resid.sqrt() / energy.sqrt().max(f64::MIN_POSITIVE)
        )));
    }
    let mut out = Array2::zeros(clean.shape());
    let mut failure = None;
    Zip::from(&mut out).and(&clean.data).and(&noise.data).and(&noisy.data).for_each(|o, x, n, y| {
        let (px, pn) = (x.norm_sqr(), n.norm_sqr());
        *o = if pn > 0.0 {
            match oracle_target_spp(y.norm_sqr(), px, pn, DEFAULT_XI_EPS) {
                Ok(p) => p,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        } else if px > 0.0 {
            1.0
        } else {
            0.0
        };
    });
    if let Some(e) = failure {
        return Err(e);
    }
    SppMap::new(out)
}
