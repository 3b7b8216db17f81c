//! Multichannel WAV reading and writing.
//!
//! Reads RIFF PCM 16/24-bit and 32-bit float; writes 32-bit float. Samples
//! are normalized to [-1, 1] doubles in memory. No resampling happens here:
//! consumers that require a specific rate must check [`AudioClip::sample_rate`].

use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};
use seld_core::clip::AudioClip;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("wav read/write failed: {0}")]
    Codec(#[from] hound::Error),
    #[error("unsupported wav encoding: {bits}-bit {format:?}")]
    UnsupportedFormat { bits: u16, format: SampleFormat },
    #[error("wav has no channels")]
    Empty,
}

/// Read a multichannel WAV file into a clip.
pub fn read_wav(path: &Path) -> Result<AudioClip, WavError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    if n_channels == 0 {
        return Err(WavError::Empty);
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Int, 24) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| v as f64 / 8388608.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Int, 32) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| v as f64 / 2147483648.0))
            .collect::<Result<_, _>>()?,
        (format, bits) => return Err(WavError::UnsupportedFormat { bits, format }),
    };

    let n_frames = interleaved.len() / n_channels;
    let mut channels = vec![Vec::with_capacity(n_frames); n_channels];
    for (i, &v) in interleaved.iter().enumerate() {
        channels[i % n_channels].push(v);
    }
    Ok(AudioClip::new(channels, spec.sample_rate).expect("deinterleaved channels"))
}

/// Write a clip as 32-bit float WAV.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<(), WavError> {
    let spec = WavSpec {
        channels: clip.n_channels() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..clip.n_samples() {
        for ch in 0..clip.n_channels() {
            writer.write_sample(clip.channel(ch)[i] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}
