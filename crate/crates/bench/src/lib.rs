//! Shared inputs for the criterion benches.

use sppkit::datagen::{mix_at_snr, synth_noise, synth_speechlike, NoiseKind};
use sppkit::nn::{golden_fixture, GoldenFixture, ModelVariant};
use sppkit::AudioBuffer;

/// Noisy speech-like utterance at 0 dB in white noise.
pub fn noisy_utterance(seconds: f64) -> AudioBuffer {
    let clean = synth_speechlike(seconds, 1).expect("valid duration");
    let noise = synth_noise(NoiseKind::White, seconds, 2).expect("valid duration");
    mix_at_snr(&clean, &noise, 0.0).expect("non-silent inputs").0
}

/// Random bundle and normalized input; the input spans `12..20` frames.
pub fn model_input(variant: ModelVariant) -> GoldenFixture {
    golden_fixture(variant, 0).expect("fixture builds")
}
