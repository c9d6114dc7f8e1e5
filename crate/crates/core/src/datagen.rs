//! Synthetic speech-like signals, noise generators, SNR mixing and training
//! pair export.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dump::{read_exact_or, read_matrix, read_u32, write_matrix, DumpKind};
use crate::error::{Error, Result};
use crate::signal::{log_power, normalize, read_wav, AudioBuffer, LogPowerFeatures, NormStats, Stft, StftConfig};
use crate::signal::{DEFAULT_POWER_FLOOR, SAMPLE_RATE};
use crate::spp_stat::{target_map, SppMap};

pub const PAIR_MAGIC: &[u8; 4] = b"SPPD";
pub const PAIR_VERSION: u32 = 1;

/// Shortest utterance [`synth_speechlike`] produces.
pub const MIN_SPEECH_DURATION_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
    Modulated,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Modulated];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Modulated => "modulated",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown noise kind `{s}` (white, pink, modulated)")))
    }
}

/// How the mixing SNR is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    /// Clean power over the whole utterance.
    #[default]
    FullUtterance,
    /// Clean power over 16 ms blocks within 40 dB of the loudest block.
    ActiveSpeech,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CleanSource {
    Speechlike,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    Synth(NoiseKind),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixSpec {
    pub snr_db: f64,
    pub seed: u64,
    pub duration_s: f64,
    pub clean: CleanSource,
    pub noise: NoiseSource,
}

/// A mixture together with its exact components.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub clean: AudioBuffer,
    pub noise: AudioBuffer,
    pub noisy: AudioBuffer,
}

impl MixSpec {
    pub fn render(&self) -> Result<Mixture> {
        if !(self.duration_s > 0.0) {
            return Err(Error::InvalidConfig(format!("duration must be > 0, got {}", self.duration_s)));
        }
        let clean = match &self.clean {
            CleanSource::Speechlike => synth_speechlike(self.duration_s, self.seed)?,
            CleanSource::File(p) => read_wav(p)?,
        };
        let noise_seed = self.seed ^ 0x6e6f_6973_6500_0000;
        let noise = match &self.noise {
            NoiseSource::Synth(kind) => synth_noise(*kind, clean.duration_s(), noise_seed)?,
            NoiseSource::File(p) => read_wav(p)?,
        };
        let (noisy, noise) = mix_at_snr(&clean, &noise, self.snr_db)?;
        Ok(Mixture { clean, noise, noisy })
    }
}

/// Loops or truncates `noise` to `len` samples.
fn fit_length(noise: &[f64], len: usize) -> Vec<f64> {
    noise.iter().copied().cycle().take(len).collect()
}

fn active_power(x: &[f64]) -> f64 {
    let block = 256;
    let powers: Vec<f64> = x.chunks(block).map(|c| c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).collect();
    let peak = powers.iter().copied().fold(0.0, f64::max);
    let active: Vec<f64> = powers.into_iter().filter(|&p| p > 0.0 && p >= peak * 1e-4).collect();
    if active.is_empty() {
        0.0
    } else {
        active.iter().sum::<f64>() / active.len() as f64
    }
}

/// Scales `noise` so the clean-to-noise power ratio over the full utterance
/// is `snr_db`; returns `(noisy, scaled_noise)` with `noisy = clean + noise`.
pub fn mix_at_snr(clean: &AudioBuffer, noise: &AudioBuffer, snr_db: f64) -> Result<(AudioBuffer, AudioBuffer)> {
    mix_at_snr_with(clean, noise, snr_db, SnrReference::FullUtterance)
}

pub fn mix_at_snr_with(
    clean: &AudioBuffer,
    noise: &AudioBuffer,
    snr_db: f64,
    reference: SnrReference,
) -> Result<(AudioBuffer, AudioBuffer)> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig(format!("SNR must be finite, got {snr_db}")));
    }
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::UnsupportedAudio(format!(
            "clean at {} Hz, noise at {} Hz",
            clean.sample_rate, noise.sample_rate
        )));
    }
    if noise.is_empty() {
        return Err(Error::Domain("noise signal is empty".into()));
    }
    let noise = fit_length(&noise.samples, clean.len());
    let clean_power = match reference {
        SnrReference::FullUtterance => clean.power(),
        SnrReference::ActiveSpeech => active_power(&clean.samples),
    };
    if !(clean_power > 0.0) {
        return Err(Error::Domain("clean signal is silent; SNR is undefined".into()));
    }
    let noise_power = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
    if !(noise_power > 0.0) {
        return Err(Error::Domain("noise signal is silent; SNR is undefined".into()));
    }
    let gain = (clean_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = noise.iter().map(|v| v * gain).collect();
    let noisy = clean.samples.iter().zip(&scaled).map(|(x, n)| x + n).collect();
    Ok((
        AudioBuffer { samples: noisy, sample_rate: clean.sample_rate },
        AudioBuffer { samples: scaled, sample_rate: clean.sample_rate },
    ))
}

/// Voiced syllables made of harmonic complexes separated by exact silences.
/// A leading silence of at least 0.15 s is always present.
pub fn synth_speechlike(duration_s: f64, seed: u64) -> Result<AudioBuffer> {
    if !(duration_s >= MIN_SPEECH_DURATION_S) {
        return Err(Error::InvalidConfig(format!(
            "speech-like signals need at least {MIN_SPEECH_DURATION_S} s, got {duration_s}"
        )));
    }
    let fs = f64::from(SAMPLE_RATE);
    let len = (duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let silence_fraction = rng.random_range(0.25..0.42);
    let lead = (0.15 + rng.random_range(0.0..0.1f64)).min(silence_fraction * duration_s);
    let voiced_total = (1.0 - silence_fraction) * duration_s;
    let syllables = ((voiced_total / 0.25).round() as usize).max(1);
    let voiced_w: Vec<f64> = (0..syllables).map(|_| rng.random_range(0.6..1.4)).collect();
    // gaps after each syllable; the last one is the trailing silence
    let gap_w: Vec<f64> = (0..syllables).map(|_| rng.random_range(0.3..1.7)).collect();
    let voiced_sum: f64 = voiced_w.iter().sum();
    let gap_sum: f64 = gap_w.iter().sum();
    let gap_total = silence_fraction * duration_s - lead;

    let mut out = vec![0.0; len];
    let mut t0 = lead;
    for s in 0..syllables {
        let dur = voiced_total * voiced_w[s] / voiced_sum;
        let start = (t0 * fs) as usize;
        let end = (((t0 + dur) * fs) as usize).min(len);
        render_syllable(&mut out[start..end], &mut rng, fs);
        t0 += dur + gap_total * gap_w[s] / gap_sum;
    }

    let rms = (out.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.1 / rms);
    }
    Ok(AudioBuffer::new(out))
}

fn render_syllable(buf: &mut [f64], rng: &mut ChaCha8Rng, fs: f64) {
    let n = buf.len();
    if n == 0 {
        return;
    }
    let f0 = rng.random_range(100.0..300.0);
    let glide = rng.random_range(-0.1..0.1);
    let harmonics = rng.random_range(5..=10);
    let amps: Vec<f64> = (1..=harmonics).map(|h| rng.random_range(0.5..1.0) / h as f64).collect();
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mod_rate = rng.random_range(3.0..6.0);
    let mod_phase = rng.random_range(0.0..2.0 * PI);
    let taper = ((0.02 * fs) as usize).min(n / 2).max(1);
    let mut phase = 0.0;
    for (i, out) in buf.iter_mut().enumerate() {
        let t = i as f64 / fs;
        let progress = i as f64 / n as f64;
        let f = f0 * (1.0 + glide * progress);
        phase += 2.0 * PI * f / fs;
        let edge = (i.min(n - 1 - i) as f64 / taper as f64).min(1.0);
        let env = edge * (1.0 - 0.3 * (0.5 + 0.5 * (2.0 * PI * mod_rate * t + mod_phase).sin()));
        let v: f64 =
            amps.iter().zip(&phases).enumerate().map(|(h, (a, p))| a * ((h + 1) as f64 * phase + p).sin()).sum();
        *out = env * v;
    }
}

/// Unit-variance-scale noise of the given colour, deterministic per seed.
pub fn synth_noise(kind: NoiseKind, duration_s: f64, seed: u64) -> Result<AudioBuffer> {
    if !(duration_s > 0.0) {
        return Err(Error::InvalidConfig(format!("duration must be > 0, got {duration_s}")));
    }
    let len = (duration_s * f64::from(SAMPLE_RATE)).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..len).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
    let samples = match kind {
        NoiseKind::White => white,
        NoiseKind::Pink => pink_filter(&white),
        NoiseKind::Modulated => {
            let fs = f64::from(SAMPLE_RATE);
            let rates = [rng.random_range(1.0..4.0), rng.random_range(1.0..4.0)];
            let phases = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
            white
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let t = i as f64 / fs;
                    let db = 3.0
                        * ((2.0 * PI * rates[0] * t + phases[0]).sin() + (2.0 * PI * rates[1] * t + phases[1]).sin());
                    w * 10f64.powf(db / 20.0)
                })
                .collect()
        }
    };
    Ok(AudioBuffer::new(samples))
}

/// Paul Kellet's refined pink filter (about -3 dB/octave above 10 Hz).
fn pink_filter(white: &[f64]) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    white
        .iter()
        .map(|&w| {
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            out * 0.11
        })
        .collect()
}

/// Un-normalized half of a training pair; lets callers compute global
/// statistics over a whole set before normalizing.
#[derive(Debug, Clone)]
pub struct PairDraft {
    pub seed: u64,
    pub snr_db: f64,
    pub features: LogPowerFeatures,
    pub target: SppMap,
}

/// One utterance of training data: normalized features, oracle targets and
/// the metadata needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFile {
    pub seed: u64,
    pub snr_db: f64,
    pub norm_stats: NormStats,
    /// Normalized log-power features, `(bins, frames)`.
    pub features: Array2<f64>,
    pub target: SppMap,
}

/// Mixes `clean` and `noise` at `snr_db` and computes raw features and
/// oracle targets. A silent `clean` gives a noise-only pair: the noise is
/// used unscaled and `snr_db` is recorded as negative infinity.
pub fn make_pair_draft(
    clean: &AudioBuffer,
    noise: &AudioBuffer,
    snr_db: f64,
    seed: u64,
    config: StftConfig,
) -> Result<PairDraft> {
    let (noisy, noise, snr_db) = if clean.power() > 0.0 {
        let (noisy, noise) = mix_at_snr(clean, noise, snr_db)?;
        (noisy, noise, snr_db)
    } else {
        let noise = AudioBuffer { samples: fit_length(&noise.samples, clean.len()), sample_rate: clean.sample_rate };
        (noise.clone(), noise, f64::NEG_INFINITY)
    };
    let stft = Stft::new(config)?;
    let noisy_spec = stft.analyze(&noisy)?;
    let target = target_map(&stft.analyze(clean)?, &stft.analyze(&noise)?, &noisy_spec)?;
    let features = log_power(&noisy_spec, DEFAULT_POWER_FLOOR)?;
    Ok(PairDraft { seed, snr_db, features, target })
}

impl PairFile {
    /// Normalizes a draft. Values are rounded to f32, as stored on disk, so
    /// a write/read round trip is exact.
    pub fn from_draft(draft: &PairDraft, stats: NormStats) -> Result<Self> {
        let f32_round = |v: f64| f64::from(v as f32);
        Ok(PairFile {
            seed: draft.seed,
            snr_db: draft.snr_db,
            norm_stats: stats,
            features: normalize(&draft.features, stats)?.data.mapv(f32_round),
            target: SppMap::new(draft.target.data.mapv(f32_round))?,
        })
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let io = |e| Error::io("<stream>", e);
        w.write_all(PAIR_MAGIC).map_err(io)?;
        w.write_all(&PAIR_VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&self.seed.to_le_bytes()).map_err(io)?;
        for v in [self.snr_db, self.norm_stats.mean, self.norm_stats.std] {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        write_matrix(w, DumpKind::Features, &self.features).map_err(io)?;
        write_matrix(w, DumpKind::Spp, &self.target.data).map_err(io)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact_or(r, &mut magic, || "pair file header cut short".into())?;
        if &magic != PAIR_MAGIC {
            return Err(Error::Format {
                what: "pair file",
                detail: format!("magic {:?}, expected \"SPPD\"", String::from_utf8_lossy(&magic)),
            });
        }
        let version = read_u32(r, "pair file header")?;
        if version != PAIR_VERSION {
            return Err(Error::Version { what: "pair file", found: version, expected: PAIR_VERSION });
        }
        let mut meta = [0u8; 32];
        read_exact_or(r, &mut meta, || "pair file metadata cut short".into())?;
        let f = |i: usize| f64::from_le_bytes(meta[i..i + 8].try_into().unwrap());
        let seed = u64::from_le_bytes(meta[..8].try_into().unwrap());
        let norm_stats = NormStats::new(f(16), f(24))?;
        let features = read_matrix(r, DumpKind::Features)?;
        let target = SppMap::new(read_matrix(r, DumpKind::Spp)?)?;
        if features.dim() != target.data.dim() {
            return Err(Error::Shape(format!(
                "pair file features {:?} and target {:?} differ",
                features.dim(),
                target.data.dim()
            )));
        }
        Ok(PairFile { seed, snr_db: f(8), norm_stats, features, target })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write(&mut w).map_err(|e| relabel(e, path))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        Self::read(&mut r).map_err(|e| relabel(e, path))
    }
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

/// One-shot pair with known normalization statistics.
pub fn make_training_pairs(
    clean: &AudioBuffer,
    noise: &AudioBuffer,
    snr_db: f64,
    seed: u64,
    config: StftConfig,
    stats: NormStats,
) -> Result<PairFile> {
    PairFile::from_draft(&make_pair_draft(clean, noise, snr_db, seed, config)?, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::stft;
    use proptest::prelude::*;

    fn power(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }

    fn silence_fraction(x: &AudioBuffer) -> f64 {
        let frames: Vec<f64> = x.samples.chunks(320).map(power).collect();
        let peak = frames.iter().copied().fold(0.0, f64::max);
        frames.iter().filter(|&&p| p < peak * 1e-3).count() as f64 / frames.len() as f64
    }

    #[test]
    fn snr_is_exact() {
        let clean = synth_speechlike(2.0, 1).unwrap();
        let noise = synth_noise(NoiseKind::Pink, 2.0, 2).unwrap();
        for snr in [-10.0, 0.0, 10.0] {
            let (noisy, scaled) = mix_at_snr(&clean, &noise, snr).unwrap();
            let measured = 10.0 * (clean.power() / scaled.power()).log10();
            assert!((measured - snr).abs() < 1e-9, "{snr} -> {measured}");
            for ((y, x), n) in noisy.samples.iter().zip(&clean.samples).zip(&scaled.samples) {
                assert_eq!(*y, x + n);
            }
        }
        let (_, scaled) = mix_at_snr(&clean, &noise, 0.0).unwrap();
        assert!((clean.power() / scaled.power() - 1.0).abs() < 1e-9);
        let (_, scaled) = mix_at_snr(&clean, &noise, 10.0).unwrap();
        assert!((clean.power() / scaled.power() - 10.0).abs() < 1e-8);
    }

    #[test]
    fn mixing_is_additive_in_stft() {
        let clean = synth_speechlike(1.0, 3).unwrap();
        let noise = synth_noise(NoiseKind::White, 1.0, 4).unwrap();
        let (noisy, scaled) = mix_at_snr(&clean, &noise, 5.0).unwrap();
        let c = StftConfig::default();
        let (y, x, n) = (stft(&noisy, c).unwrap(), stft(&clean, c).unwrap(), stft(&scaled, c).unwrap());
        let err = (&y.data - &x.data - &n.data).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn noise_is_looped_or_truncated() {
        let clean = synth_speechlike(1.0, 3).unwrap();
        let short = synth_noise(NoiseKind::White, 0.3, 4).unwrap();
        let (noisy, scaled) = mix_at_snr(&clean, &short, 0.0).unwrap();
        assert_eq!(noisy.len(), clean.len());
        let r = scaled.samples[0] / short.samples[0];
        assert!((scaled.samples[short.len()] - r * short.samples[0]).abs() < 1e-12);
    }

    #[test]
    fn silent_clean_is_rejected() {
        let noise = synth_noise(NoiseKind::White, 1.0, 4).unwrap();
        assert!(matches!(mix_at_snr(&AudioBuffer::zeros(16000), &noise, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn active_speech_reference_raises_noise() {
        let clean = synth_speechlike(2.0, 5).unwrap();
        let noise = synth_noise(NoiseKind::White, 2.0, 6).unwrap();
        let (_, full) = mix_at_snr(&clean, &noise, 0.0).unwrap();
        let (_, active) = mix_at_snr_with(&clean, &noise, 0.0, SnrReference::ActiveSpeech).unwrap();
        assert!(active.power() > full.power());
    }

    #[test]
    fn speechlike_properties() {
        for seed in 0..20 {
            let a = synth_speechlike(3.0, seed).unwrap();
            assert_eq!(a.samples, synth_speechlike(3.0, seed).unwrap().samples);
            let s = silence_fraction(&a);
            assert!((0.2..=0.5).contains(&s), "seed {seed}: silence {s}");
            // leading gap for noise initialization
            assert!(a.samples[..1600].iter().all(|&v| v == 0.0));
            let spec = stft(&a, StftConfig::default()).unwrap().power();
            let low: f64 = spec.slice(ndarray::s![..64, ..]).sum();
            assert!(low / spec.sum() >= 0.9, "seed {seed}");
        }
        assert!(synth_speechlike(0.4, 0).is_err());
    }

    #[test]
    fn white_noise_is_flat() {
        let x = synth_noise(NoiseKind::White, 10.0, 9).unwrap();
        let p = stft(&x, StftConfig::default()).unwrap().power();
        let mean = p.mean_axis(ndarray::Axis(1)).unwrap();
        let avg = mean.slice(ndarray::s![1..128]).mean().unwrap();
        for k in 1..128 {
            let db = 10.0 * (mean[k] / avg).log10();
            assert!(db.abs() <= 1.5, "bin {k}: {db}");
        }
    }

    #[test]
    fn pink_noise_slopes_down() {
        let x = synth_noise(NoiseKind::Pink, 10.0, 9).unwrap();
        let p = stft(&x, StftConfig::default()).unwrap().power();
        let mean = p.mean_axis(ndarray::Axis(1)).unwrap();
        // about 3 dB per octave: bins 8 -> 64 span three octaves
        let drop = 10.0 * (mean[8] / mean[64]).log10();
        assert!((6.0..12.0).contains(&drop), "{drop}");
    }

    fn frame_power_cv(x: &AudioBuffer) -> f64 {
        let frames: Vec<f64> = x.samples.chunks(256).map(power).collect();
        let n = frames.len() as f64;
        let m = frames.iter().sum::<f64>() / n;
        (frames.iter().map(|p| (p - m).powi(2)).sum::<f64>() / n).sqrt() / m
    }

    #[test]
    fn modulated_is_less_stationary() {
        for seed in 0..5 {
            let w = synth_noise(NoiseKind::White, 5.0, seed).unwrap();
            let m = synth_noise(NoiseKind::Modulated, 5.0, seed).unwrap();
            assert!(frame_power_cv(&m) > frame_power_cv(&w));
            assert_eq!(m.samples, synth_noise(NoiseKind::Modulated, 5.0, seed).unwrap().samples);
        }
    }

    #[test]
    fn noise_kind_parsing() {
        assert_eq!("pink".parse::<NoiseKind>().unwrap(), NoiseKind::Pink);
        assert!("brown".parse::<NoiseKind>().is_err());
    }

    #[test]
    fn noise_only_pair_has_zero_targets() {
        let noise = synth_noise(NoiseKind::White, 1.0, 1).unwrap();
        let draft = make_pair_draft(&AudioBuffer::zeros(16000), &noise, 0.0, 1, StftConfig::default()).unwrap();
        assert!(draft.target.data.iter().all(|&p| p == 0.0));
        assert_eq!(draft.snr_db, f64::NEG_INFINITY);
    }

    #[test]
    fn pair_file_round_trip() {
        let clean = synth_speechlike(1.0, 7).unwrap();
        let noise = synth_noise(NoiseKind::Modulated, 1.0, 8).unwrap();
        let draft = make_pair_draft(&clean, &noise, -5.0, 7, StftConfig::default()).unwrap();
        let stats = NormStats::from_features([&draft.features]).unwrap();
        let pair = PairFile::from_draft(&draft, stats).unwrap();
        assert!(pair.target.data.iter().all(|p| (0.0..=1.0).contains(p)));
        let mut buf = Vec::new();
        pair.write(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SPPD");
        // header: magic, version, seed, snr, mean, std
        assert_eq!(&buf[40..44], b"SPPF");
        let back = PairFile::read(&mut buf.as_slice()).unwrap();
        assert_eq!(back, pair);
        let bits = |m: &Array2<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.features), bits(&pair.features));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.sppd");
        pair.save(&path).unwrap();
        assert_eq!(PairFile::load(&path).unwrap(), pair);

        buf[0] = b'X';
        assert!(matches!(PairFile::read(&mut buf.as_slice()), Err(Error::Format { .. })));
    }

    #[test]
    fn mix_spec_renders() {
        let spec = MixSpec {
            snr_db: 3.0,
            seed: 5,
            duration_s: 1.0,
            clean: CleanSource::Speechlike,
            noise: NoiseSource::Synth(NoiseKind::Pink),
        };
        let m = spec.render().unwrap();
        assert!((10.0 * (m.clean.power() / m.noise.power()).log10() - 3.0).abs() < 0.01);
        assert!(MixSpec { duration_s: 0.0, ..spec }.render().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn requested_snr_is_met(snr in -10.0f64..10.0, seed in 0u64..1000) {
            let clean = synth_speechlike(0.5, seed).unwrap();
            let noise = synth_noise(NoiseKind::White, 0.5, seed + 1).unwrap();
            let (_, scaled) = mix_at_snr(&clean, &noise, snr).unwrap();
            let measured = 10.0 * (clean.power() / scaled.power()).log10();
            prop_assert!((measured - snr).abs() < 0.01);
        }
    }
}
