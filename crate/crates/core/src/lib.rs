//! Speech presence probability estimation, noise PSD tracking and
//! log-spectral-amplitude speech enhancement.
//!
//! The pipeline runs on 16 kHz mono audio: STFT, an SPP estimator
//! (statistical or neural), an MMSE noise tracker, decision-directed a priori
//! SNR, the LSA gain and overlap-add resynthesis.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod dump;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod lsa;
pub mod nn;
pub mod noise;
pub mod signal;
pub mod spp_stat;

pub use dump::{load_any_dump, load_dump, save_dump, DumpKind};
pub use error::{Error, Result};
pub use nn::{load_model, model_forward, save_model, ModelBundle, ModelDescriptor, ModelVariant};
pub use noise::{NoiseTrackerState, TrackerKind};
pub use signal::{
    istft, log_power, normalize, stft, AudioBuffer, ComplexSpectrogram, LogPowerFeatures, NormStats, StftConfig,
    SAMPLE_RATE,
};
pub use spp_stat::{FixedPriorParams, SppMap};
