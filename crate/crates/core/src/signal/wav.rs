//! Mono 16 kHz WAV I/O (16-bit PCM and 32-bit float).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioBuffer, SAMPLE_RATE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedAudio(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio(format!(
            "{}: {} channels, only mono is supported",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedAudio(format!(
            "{}: sample rate {} Hz, only {} Hz is supported (no resampling)",
            path.display(),
            spec.sample_rate,
            SAMPLE_RATE
        )));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => {
            reader.into_samples::<i16>().map(|s| s.map(|v| f64::from(v) / 32768.0)).collect::<Result<Vec<_>, _>>()?
        }
        (SampleFormat::Float, 32) => {
            reader.into_samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<Vec<_>, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedAudio(format!(
                "{}: {bits}-bit {fmt:?} samples, only 16-bit PCM and 32-bit float are supported",
                path.display()
            )))
        }
    };
    let audio = AudioBuffer::new(samples);
    audio.validate()?;
    Ok(audio)
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    audio.validate()?;
    let spec = match encoding {
        WavEncoding::Pcm16 => {
            WavSpec { channels: 1, sample_rate: SAMPLE_RATE, bits_per_sample: 16, sample_format: SampleFormat::Int }
        }
        WavEncoding::Float32 => {
            WavSpec { channels: 1, sample_rate: SAMPLE_RATE, bits_per_sample: 32, sample_format: SampleFormat::Float }
        }
    };
    let map_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(other),
    };
    let mut writer = WavWriter::create(path, spec).map_err(map_io)?;
    for &s in &audio.samples {
        match encoding {
            WavEncoding::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(v).map_err(map_io)?;
            }
            WavEncoding::Float32 => writer.write_sample(s as f32).map_err(map_io)?,
        }
    }
    writer.finalize().map_err(map_io)
}
