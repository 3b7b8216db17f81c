//! STFT analysis and overlap-add synthesis.
//!
//! Hann-windowed frames with FFT size equal to the window length (no zero
//! padding). Synthesis requires 50% overlap, where the periodic Hann window
//! sums to exactly one and plain overlap-add reconstructs interior samples.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use seld_core::clip::AudioClip;
use seld_core::spectral::SpectralTensor;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StftError {
    #[error("clip ({samples} samples) is shorter than one window ({window} samples)")]
    InsufficientInput { samples: usize, window: usize },
    #[error("window ({window_s} s) and hop ({hop_s} s) must be positive whole sample counts with window >= hop")]
    BadWindowHop { window_s: f64, hop_s: f64 },
    #[error("synthesis requires hop = window/2, got window {window} / hop {hop} samples")]
    NotCola { window: usize, hop: usize },
}

/// Periodic Hann window: `0.5 * (1 - cos(2 pi n / len))`.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (std::f64::consts::TAU * n as f64 / len as f64).cos()))
        .collect()
}

fn to_samples(seconds: f64, sample_rate: u32) -> Option<usize> {
    let exact = seconds * sample_rate as f64;
    let rounded = exact.round();
    if rounded >= 1.0 && (exact - rounded).abs() < 1e-6 {
        Some(rounded as usize)
    } else {
        None
    }
}

/// Short-time Fourier transform of every channel.
///
/// Frame count is `(n - window) / hop + 1`; bins are one-sided
/// (`fft/2 + 1`).
pub fn stft(clip: &AudioClip, window_s: f64, hop_s: f64) -> Result<SpectralTensor, StftError> {
    let sr = clip.sample_rate();
    let (window, hop) = match (to_samples(window_s, sr), to_samples(hop_s, sr)) {
        (Some(w), Some(h)) if w >= h => (w, h),
        _ => return Err(StftError::BadWindowHop { window_s, hop_s }),
    };
    let n = clip.n_samples();
    if n < window {
        return Err(StftError::InsufficientInput {
            samples: n,
            window,
        });
    }
    let n_frames = (n - window) / hop + 1;
    let n_bins = window / 2 + 1;
    let win = hann_periodic(window);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(window);

    let mut out = SpectralTensor::zeros(clip.n_channels(), n_frames, window, window_s, hop_s, sr);
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    for ch in 0..clip.n_channels() {
        let samples = clip.channel(ch);
        for t in 0..n_frames {
            let start = t * hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(samples[start + i] * win[i], 0.0);
            }
            fft.process(&mut buf);
            let frame = out.frame_mut(ch, t);
            frame.copy_from_slice(&buf[..n_bins]);
        }
    }
    Ok(out)
}

/// Inverse STFT by overlap-add.
///
/// Requires 50% overlap. Interior samples (where window sums reach one)
/// reproduce the original; the first and last half-window taper.
pub fn istft(spec: &SpectralTensor) -> Result<AudioClip, StftError> {
    let sr = spec.sample_rate();
    let window = spec.fft_size();
    let hop = match to_samples(spec.hop_s(), sr) {
        Some(h) => h,
        None => {
            return Err(StftError::BadWindowHop {
                window_s: spec.window_s(),
                hop_s: spec.hop_s(),
            })
        }
    };
    if hop * 2 != window {
        return Err(StftError::NotCola { window, hop });
    }
    let n_frames = spec.n_frames();
    let n_out = if n_frames == 0 {
        0
    } else {
        (n_frames - 1) * hop + window
    };

    let mut planner = FftPlanner::<f64>::new();
    let ifft: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(window);

    let mut channels = Vec::with_capacity(spec.n_channels());
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    for ch in 0..spec.n_channels() {
        let mut samples = vec![0.0f64; n_out];
        for t in 0..n_frames {
            let frame = spec.frame(ch, t);
            buf[..frame.len()].copy_from_slice(frame);
            // Hermitian completion of the one-sided spectrum.
            for k in frame.len()..window {
                buf[k] = frame[window - k].conj();
            }
            ifft.process(&mut buf);
            let start = t * hop;
            for (i, b) in buf.iter().enumerate() {
                samples[start + i] += b.re / window as f64;
            }
        }
        channels.push(samples);
    }
    Ok(AudioClip::new(channels, sr).expect("equal-length channels"))
}

/// Index range of samples fully covered by overlapping windows, i.e. where
/// overlap-add reconstruction is exact.
pub fn interior_range(spec: &SpectralTensor) -> std::ops::Range<usize> {
    let window = spec.fft_size();
    let hop = window / 2;
    if spec.n_frames() < 2 {
        return 0..0;
    }
    hop..(spec.n_frames() - 1) * hop + hop
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_clip(n: usize, seed: u64, sr: u32) -> AudioClip {
        let mut state = seed;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        AudioClip::from_mono(samples, sr)
    }

    /// Direct DFT of one Hann-windowed frame: the independent oracle.
    fn direct_dft_frame(samples: &[f64], window: usize) -> Vec<Complex64> {
        let win = hann_periodic(window);
        let n_bins = window / 2 + 1;
        (0..n_bins)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (n, (&s, &w)) in samples.iter().zip(&win).enumerate() {
                    let phase = -std::f64::consts::TAU * k as f64 * n as f64 / window as f64;
                    acc += Complex64::from_polar(s * w, phase);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        // 1 kHz at 24 kHz, 960-sample window: 25 Hz per bin -> bin 40.
        let sr = 24000;
        let samples: Vec<f64> = (0..sr as usize)
            .map(|n| (std::f64::consts::TAU * 1000.0 * n as f64 / sr as f64).sin())
            .collect();
        let clip = AudioClip::from_mono(samples, sr);
        let spec = stft(&clip, 0.04, 0.02).unwrap();
        assert_eq!(spec.fft_size(), 960);
        assert_eq!(spec.n_bins(), 481);
        let frame = spec.frame(0, 3);
        let peak = frame
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, 40);
    }

    #[test]
    fn matches_direct_dft_oracle() {
        let clip = noise_clip(2000, 99, 24000);
        let spec = stft(&clip, 0.04, 0.02).unwrap();
        let oracle = direct_dft_frame(&clip.channel(0)[480..480 + 960], 960);
        let frame = spec.frame(0, 1);
        for (k, (got, expect)) in frame.iter().zip(&oracle).enumerate() {
            assert!(
                (got - expect).norm() < 1e-8,
                "bin {k}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn zero_clip_gives_zero_coefficients() {
        let clip = AudioClip::silent(2, 2400, 24000);
        let spec = stft(&clip, 0.04, 0.02).unwrap();
        assert!(spec.coefficients().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn five_second_clip_has_249_frames() {
        let clip = AudioClip::silent(1, 120000, 24000);
        let spec = stft(&clip, 0.04, 0.02).unwrap();
        assert_eq!(spec.n_frames(), 249);
    }

    #[test]
    fn short_clip_is_an_error() {
        let clip = AudioClip::silent(1, 500, 24000);
        assert_eq!(
            stft(&clip, 0.04, 0.02).unwrap_err(),
            StftError::InsufficientInput {
                samples: 500,
                window: 960
            }
        );
    }

    #[test]
    fn round_trip_reconstructs_interior() {
        let clip = noise_clip(24000, 7, 24000);
        let spec = stft(&clip, 0.04, 0.02).unwrap();
        let rec = istft(&spec).unwrap();
        let range = interior_range(&spec);
        let mut err = 0.0;
        let mut energy = 0.0;
        for i in range {
            let d = rec.channel(0)[i] - clip.channel(0)[i];
            err += d * d;
            energy += clip.channel(0)[i] * clip.channel(0)[i];
        }
        let rel = (err / energy).sqrt();
        assert!(rel < 1e-6, "relative RMS {rel}");
    }

    #[test]
    fn zero_spectrum_gives_zero_clip() {
        let spec = SpectralTensor::zeros(1, 5, 960, 0.04, 0.02, 24000);
        let clip = istft(&spec).unwrap();
        assert!(clip.channel(0).iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_frame_reproduces_windowed_frame() {
        let clip = noise_clip(960, 3, 24000);
        let spec = stft(&clip, 0.04, 0.02).unwrap();
        assert_eq!(spec.n_frames(), 1);
        let rec = istft(&spec).unwrap();
        let win = hann_periodic(960);
        for i in 0..960 {
            let expect = clip.channel(0)[i] * win[i];
            assert!((rec.channel(0)[i] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn non_cola_hop_is_rejected() {
        let clip = noise_clip(24000, 5, 24000);
        let spec = stft(&clip, 0.04, 0.01).unwrap();
        assert_eq!(
            istft(&spec).unwrap_err(),
            StftError::NotCola {
                window: 960,
                hop: 240
            }
        );
    }

    #[test]
    fn parseval_energy_consistency() {
        let clip = noise_clip(4800, 21, 24000);
        let spec = stft(&clip, 0.04, 0.02).unwrap();
        let win = hann_periodic(960);
        for t in 0..spec.n_frames() {
            let mut windowed_energy = 0.0;
            for i in 0..960 {
                let s = clip.channel(0)[t * 480 + i] * win[i];
                windowed_energy += s * s;
            }
            let frame = spec.frame(0, t);
            let mut spectral = frame[0].norm_sqr() + frame[480].norm_sqr();
            for c in &frame[1..480] {
                spectral += 2.0 * c.norm_sqr();
            }
            let lhs = spectral / 960.0;
            assert!(
                (lhs - windowed_energy).abs() <= 1e-6 * windowed_energy.max(1e-12),
                "frame {t}: {lhs} vs {windowed_energy}"
            );
        }
    }
}
