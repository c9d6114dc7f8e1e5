//! SPP-driven noise PSD estimation.
//!
//! The optimal tracker combines the periodogram and the previous estimate
//! weighted by the SPP, then smooths recursively. The sub-optimal tracker
//! keeps only the speech-absence term of the current frame and applies no
//! temporal smoothing.

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound for every noise PSD estimate.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Frames in the first 0.1 s at 16 kHz with an 8 ms hop.
pub const DEFAULT_INIT_FRAMES: usize = 12;

pub const DEFAULT_SMOOTHING: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    /// Unsmoothed current-frame estimate `(1 - p) |Y|^2`.
    #[default]
    Suboptimal,
    /// SPP-weighted MMSE estimate with recursive smoothing.
    Optimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrackerState {
    pub phi_n_hat: Array1<f64>,
    /// Recursive smoothing factor of the optimal tracker.
    pub c: f64,
    pub init_frames: usize,
    pub frames_seen: usize,
    pub floor: f64,
}

impl NoiseTrackerState {
    pub fn new(bins: usize, c: f64, init_frames: usize) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidConfig(format!("smoothing factor must be in (0,1), got {c}")));
        }
        if init_frames == 0 {
            return Err(Error::InvalidConfig("init_frames must be >= 1".into()));
        }
        Ok(NoiseTrackerState { phi_n_hat: Array1::zeros(bins), c, init_frames, frames_seen: 0, floor: NOISE_FLOOR })
    }

    pub fn with_defaults(bins: usize) -> Self {
        Self::new(bins, DEFAULT_SMOOTHING, DEFAULT_INIT_FRAMES).expect("default tracker parameters are valid")
    }

    /// A tracker that starts from a known noise PSD.
    pub fn from_psd(psd: Array1<f64>, c: f64) -> Result<Self> {
        let mut s = Self::new(psd.len(), c, 1)?;
        s.phi_n_hat = psd.mapv(|v| v.max(NOISE_FLOOR));
        s.frames_seen = 1;
        Ok(s)
    }

    pub fn is_initialized(&self) -> bool {
        self.frames_seen >= self.init_frames
    }

    pub fn num_bins(&self) -> usize {
        self.phi_n_hat.len()
    }
}

/// Folds one periodogram frame into the running mean used as the initial
/// noise PSD.
pub fn init_noise_psd(state: &mut NoiseTrackerState, y_pow: ArrayView1<f64>) -> Result<()> {
    if y_pow.len() != state.num_bins() {
        return Err(Error::Shape(format!("frame has {} bins, tracker has {}", y_pow.len(), state.num_bins())));
    }
    if state.is_initialized() {
        return Err(Error::InvalidConfig("noise tracker already initialized".into()));
    }
    let n = state.frames_seen as f64;
    Zip::from(&mut state.phi_n_hat).and(&y_pow).for_each(|m, &y| {
        *m = (*m * n + y) / (n + 1.0);
    });
    state.frames_seen += 1;
    if state.is_initialized() {
        let floor = state.floor;
        state.phi_n_hat.mapv_inplace(|v| v.max(floor));
    }
    Ok(())
}

/// `max((1 - p) |Y|^2, floor)`.
pub fn suboptimal_mmse(p_spp: f64, y_pow: f64, floor: f64) -> f64 {
    ((1.0 - p_spp.clamp(0.0, 1.0)) * y_pow).max(floor)
}

pub fn suboptimal_mmse_frame(p_spp: ArrayView1<f64>, y_pow: ArrayView1<f64>, floor: f64) -> Array1<f64> {
    Zip::from(&p_spp).and(&y_pow).map_collect(|&p, &y| suboptimal_mmse(p, y, floor))
}

/// One step of the optimal tracker. Returns the new estimate, which is also
/// stored in `state`.
pub fn optimal_mmse_step(
    state: &mut NoiseTrackerState,
    p_spp: ArrayView1<f64>,
    y_pow: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    if !state.is_initialized() {
        return Err(Error::Uninitialized);
    }
    if p_spp.len() != state.num_bins() || y_pow.len() != state.num_bins() {
        return Err(Error::Shape(format!(
            "SPP has {} bins, periodogram {}, tracker {}",
            p_spp.len(),
            y_pow.len(),
            state.num_bins()
        )));
    }
    let (c, floor) = (state.c, state.floor);
    Zip::from(&mut state.phi_n_hat).and(&p_spp).and(&y_pow).for_each(|prev, &p, &y| {
        let p = p.clamp(0.0, 1.0);
        let expected = (1.0 - p) * y + p * *prev;
        *prev = (c * *prev + (1.0 - c) * expected).max(floor);
    });
    Ok(state.phi_n_hat.clone())
}

/// Runs a tracker over a whole utterance. The first `init_frames` frames of
/// the optimal tracker only feed initialization; their output is the running
/// mean so far. Returns the `(bins, frames)` noise track.
pub fn track(
    kind: TrackerKind,
    spp: &ndarray::Array2<f64>,
    y_pow: &ndarray::Array2<f64>,
    c: f64,
    init_frames: usize,
) -> Result<ndarray::Array2<f64>> {
    if spp.dim() != y_pow.dim() {
        return Err(Error::Shape(format!("SPP {:?} vs periodogram {:?}", spp.dim(), y_pow.dim())));
    }
    let mut out = ndarray::Array2::zeros(y_pow.dim());
    match kind {
        TrackerKind::Suboptimal => {
            Zip::from(&mut out).and(spp).and(y_pow).for_each(|o, &p, &y| {
                *o = suboptimal_mmse(p, y, NOISE_FLOOR);
            });
        }
        TrackerKind::Optimal => {
            let mut state = NoiseTrackerState::new(y_pow.nrows(), c, init_frames)?;
            for l in 0..y_pow.ncols() {
                if state.is_initialized() {
                    optimal_mmse_step(&mut state, spp.column(l), y_pow.column(l))?;
                } else {
                    init_noise_psd(&mut state, y_pow.column(l))?;
                }
                out.column_mut(l).assign(&state.phi_n_hat.mapv(|v| v.max(NOISE_FLOOR)));
            }
        }
    }
    Ok(out)
}
