//! Multichannel audio sample buffers.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// A multichannel buffer of audio samples at a fixed sample rate.
///
/// Channels are stored as separate equal-length sample vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipError {
    /// Channels of differing lengths, or no channels at all.
    RaggedChannels,
}

impl fmt::Display for ClipError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClipError::RaggedChannels => write!(f, "channels empty or of unequal length"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ClipError {}

impl AudioClip {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self, ClipError> {
        if channels.is_empty() {
            return Err(ClipError::RaggedChannels);
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(ClipError::RaggedChannels);
        }
        Ok(AudioClip {
            channels,
            sample_rate,
        })
    }

    /// All-zero clip with the given shape.
    pub fn silent(n_channels: usize, n_samples: usize, sample_rate: u32) -> Self {
        AudioClip {
            channels: vec![vec![0.0; n_samples]; n_channels.max(1)],
            sample_rate,
        }
    }

    pub fn from_mono(samples: Vec<f64>, sample_rate: u32) -> Self {
        AudioClip {
            channels: vec![samples],
            sample_rate,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channel_mut(&mut self, index: usize) -> &mut Vec<f64> {
        &mut self.channels[index]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_channels() {
        assert_eq!(
            AudioClip::new(alloc::vec![alloc::vec![0.0; 3], alloc::vec![0.0; 4]], 24000),
            Err(ClipError::RaggedChannels)
        );
        assert_eq!(AudioClip::new(Vec::new(), 24000), Err(ClipError::RaggedChannels));
    }

    #[test]
    fn silent_shape() {
        let c = AudioClip::silent(4, 100, 24000);
        assert_eq!(c.n_channels(), 4);
        assert_eq!(c.n_samples(), 100);
        assert!(c.channel(2).iter().all(|&s| s == 0.0));
    }
}
