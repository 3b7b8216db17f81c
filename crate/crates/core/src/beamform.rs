//! Trajectory-driven delay-and-sum beamforming.
//!
//! For each track the per-channel steering value is `exp(-j 2 pi f d / c)`
//! with `d` the Euclidean distance from the track's source position to the
//! capsule, and the beamformed output is the weighted mean of the
//! phase-aligned channels:
//!
//! `Y_k(f,t) = (1/M) * sum_m w_k(t) * conj(s_{k,m}(f,t)) * X_m(f,t)`
//!
//! Track weights follow the source-distance rule: `w = |pos|` when
//! `|pos| >= 0.5`, else `0.01`. Inactive frames keep the 0.01 weight and hold
//! the last known direction (+x before any activity).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::DirectionVector;
use crate::spectral::SpectralTensor;
use crate::trackwise::{ClipLabels, ACTIVITY_THRESHOLD};

/// Speed of sound in air, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Weight applied to tracks/frames with no active source.
pub const INACTIVE_WEIGHT: f64 = 0.01;

/// Source-distance threshold below which the inactive weight applies.
pub const WEIGHT_DISTANCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformError {
    /// Spectral channel count differs from the capsule count.
    ChannelMismatch { channels: usize, capsules: usize },
    /// Empty geometry or malformed timing parameters.
    InvalidConfig,
}

impl fmt::Display for BeamformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeamformError::ChannelMismatch { channels, capsules } => write!(
                f,
                "spectral tensor has {channels} channels but geometry has {capsules} capsules"
            ),
            BeamformError::InvalidConfig => write!(f, "invalid beamformer configuration"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BeamformError {}

/// Capsule positions in meters relative to the array center.
#[derive(Debug, Clone, PartialEq)]
pub struct MicArrayGeometry {
    positions: Vec<[f64; 3]>,
}

impl MicArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self, BeamformError> {
        if positions.is_empty() {
            return Err(BeamformError::InvalidConfig);
        }
        Ok(MicArrayGeometry { positions })
    }

    /// Four capsules on a regular tetrahedron of the given radius.
    pub fn tetrahedron(radius: f64) -> Self {
        let s = radius / 3.0f64.sqrt();
        MicArrayGeometry {
            positions: vec![
                [s, s, s],
                [s, -s, -s],
                [-s, s, -s],
                [-s, -s, s],
            ],
        }
    }

    pub fn n_capsules(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, capsule: usize) -> [f64; 3] {
        self.positions[capsule]
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }
}

/// 3-D Euclidean distance between a source position and a capsule position.
pub fn source_mic_distance(src: DirectionVector, mic: [f64; 3]) -> f64 {
    let dx = src.x - mic[0];
    let dy = src.y - mic[1];
    let dz = src.z - mic[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Unit-modulus steering value `exp(-j 2 pi f d / c)`.
pub fn steering_value(f_hz: f64, d_m: f64, c: f64) -> Complex64 {
    Complex64::from_polar(1.0, -core::f64::consts::TAU * f_hz * d_m / c)
}

/// Track weight from the source position: the source distance when at least
/// 0.5 m from the array center, else the inactive weight.
pub fn track_weight(src: DirectionVector) -> f64 {
    let d = src.norm();
    if d >= WEIGHT_DISTANCE_THRESHOLD {
        d
    } else {
        INACTIVE_WEIGHT
    }
}

/// Beamformer timing and physics parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamformConfig {
    pub speed_of_sound: f64,
    /// Label frame hop in seconds; labels are held within each label frame.
    pub label_hop_s: f64,
}

impl Default for BeamformConfig {
    fn default() -> Self {
        BeamformConfig {
            speed_of_sound: SPEED_OF_SOUND,
            label_hop_s: 0.1,
        }
    }
}

/// Per-track steering data at STFT frame resolution: source-to-capsule
/// distances and track weights. Steering values are derived on demand.
#[derive(Debug, Clone)]
pub struct SteeringField {
    n_tracks: usize,
    n_capsules: usize,
    n_frames: usize,
    /// Distances, indexed [track][capsule][frame].
    distances: Vec<f64>,
    /// Weights, indexed [track][frame].
    weights: Vec<f64>,
    bin_hz: f64,
    speed_of_sound: f64,
}

impl SteeringField {
    /// Build steering data for every (track, capsule, STFT frame).
    ///
    /// Label frames are upsampled to STFT frames by zero-order hold using
    /// sample-exact integer arithmetic.
    pub fn build(
        trajectories: &ClipLabels,
        geom: &MicArrayGeometry,
        spec: &SpectralTensor,
        cfg: &BeamformConfig,
    ) -> Result<Self, BeamformError> {
        let sr = spec.sample_rate() as f64;
        let hop_samples = (spec.hop_s() * sr).round() as usize;
        let label_hop_samples = (cfg.label_hop_s * sr).round() as usize;
        if hop_samples == 0 || label_hop_samples == 0 || cfg.speed_of_sound <= 0.0 {
            return Err(BeamformError::InvalidConfig);
        }

        let n_tracks = trajectories.n_tracks();
        let n_label_frames = trajectories.n_frames();
        let n_frames = spec.n_frames();
        let n_capsules = geom.n_capsules();

        // Per (track, label frame): held position and weight.
        let mut positions = vec![DirectionVector::new(1.0, 0.0, 0.0); n_tracks * n_label_frames.max(1)];
        let mut label_weights = vec![INACTIVE_WEIGHT; n_tracks * n_label_frames.max(1)];
        for k in 0..n_tracks {
            let mut held = DirectionVector::new(1.0, 0.0, 0.0);
            for t in 0..n_label_frames {
                let i = k * n_label_frames + t;
                if trajectories.activity(k, t) >= ACTIVITY_THRESHOLD {
                    held = trajectories.direction(k, t);
                    positions[i] = held;
                    label_weights[i] = track_weight(held);
                } else {
                    positions[i] = held;
                    label_weights[i] = INACTIVE_WEIGHT;
                }
            }
        }

        let mut distances = vec![0.0; n_tracks * n_capsules * n_frames];
        let mut weights = vec![INACTIVE_WEIGHT; n_tracks * n_frames];
        for k in 0..n_tracks {
            for t in 0..n_frames {
                let label = if n_label_frames == 0 {
                    0
                } else {
                    (t * hop_samples / label_hop_samples).min(n_label_frames - 1)
                };
                let (pos, w) = if n_label_frames == 0 {
                    (DirectionVector::new(1.0, 0.0, 0.0), INACTIVE_WEIGHT)
                } else {
                    (
                        positions[k * n_label_frames + label],
                        label_weights[k * n_label_frames + label],
                    )
                };
                weights[k * n_frames + t] = w;
                for m in 0..n_capsules {
                    distances[(k * n_capsules + m) * n_frames + t] =
                        source_mic_distance(pos, geom.position(m));
                }
            }
        }

        Ok(SteeringField {
            n_tracks,
            n_capsules,
            n_frames,
            distances,
            weights,
            bin_hz: sr / spec.fft_size() as f64,
            speed_of_sound: cfg.speed_of_sound,
        })
    }

    pub fn n_tracks(&self) -> usize {
        self.n_tracks
    }

    pub fn distance(&self, track: usize, capsule: usize, frame: usize) -> f64 {
        self.distances[(track * self.n_capsules + capsule) * self.n_frames + frame]
    }

    pub fn weight(&self, track: usize, frame: usize) -> f64 {
        self.weights[track * self.n_frames + frame]
    }

    /// The steering value `s_{k,m}(f,t)` for one bin.
    pub fn value(&self, track: usize, capsule: usize, frame: usize, bin: usize) -> Complex64 {
        steering_value(
            bin as f64 * self.bin_hz,
            self.distance(track, capsule, frame),
            self.speed_of_sound,
        )
    }
}

/// Delay-and-sum beamforming of an M-channel spectral tensor along the given
/// track trajectories. Returns one single-channel tensor per track.
pub fn ds_beamform(
    spec: &SpectralTensor,
    trajectories: &ClipLabels,
    geom: &MicArrayGeometry,
    cfg: &BeamformConfig,
) -> Result<Vec<SpectralTensor>, BeamformError> {
    if spec.n_channels() != geom.n_capsules() {
        return Err(BeamformError::ChannelMismatch {
            channels: spec.n_channels(),
            capsules: geom.n_capsules(),
        });
    }
    let field = SteeringField::build(trajectories, geom, spec, cfg)?;
    let m_count = geom.n_capsules();

    let mut outputs = Vec::with_capacity(trajectories.n_tracks());
    for k in 0..trajectories.n_tracks() {
        let mut out = SpectralTensor::zeros(
            1,
            spec.n_frames(),
            spec.fft_size(),
            spec.window_s(),
            spec.hop_s(),
            spec.sample_rate(),
        );
        for t in 0..spec.n_frames() {
            let w = field.weight(k, t);
            let scale = w / m_count as f64;
            let acc = out.frame_mut(0, t);
            for m in 0..m_count {
                let x = spec.frame(m, t);
                let step = core::f64::consts::TAU * field.bin_hz * field.distance(k, m, t)
                    / field.speed_of_sound;
                for (bin, acc_bin) in acc.iter_mut().enumerate() {
                    // conj(s) = exp(+j 2 pi f d / c)
                    let rotor = Complex64::from_polar(1.0, step * bin as f64);
                    *acc_bin += rotor * x[bin];
                }
            }
            for acc_bin in acc.iter_mut() {
                *acc_bin *= scale;
            }
        }
        outputs.push(out);
    }
    Ok(outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn distance_basics() {
        let origin = [0.0, 0.0, 0.0];
        assert_eq!(
            source_mic_distance(DirectionVector::new(0.2, -0.1, 0.4), [0.2, -0.1, 0.4]),
            0.0
        );
        assert_eq!(
            source_mic_distance(DirectionVector::new(1.0, 2.0, 2.0), origin),
            3.0
        );
        // Translation invariance.
        let a = DirectionVector::new(0.3, 0.7, -0.2);
        let b = [1.0, -0.5, 0.25];
        let v = [10.0, -3.0, 2.5];
        let d1 = source_mic_distance(a, b);
        let d2 = source_mic_distance(
            DirectionVector::new(a.x + v[0], a.y + v[1], a.z + v[2]),
            [b[0] + v[0], b[1] + v[1], b[2] + v[2]],
        );
        assert_close(d1, d2, 1e-12);
    }

    #[test]
    fn steering_value_phases() {
        let s = steering_value(1234.0, 0.0, SPEED_OF_SOUND);
        assert_close(s.re, 1.0, 1e-15);
        assert_close(s.im, 0.0, 1e-15);

        // One full period: f*d/c = 1.
        let s = steering_value(1000.0, 0.343, 343.0);
        assert_close(s.re, 1.0, 1e-12);
        assert_close(s.im, 0.0, 1e-12);

        // Quarter period: phase -pi/2 -> -j.
        let s = steering_value(1000.0, 0.085750, 343.0);
        assert_close(s.re, 0.0, 1e-12);
        assert_close(s.im, -1.0, 1e-12);
    }

    #[test]
    fn steering_value_is_unit_modulus() {
        for i in 0..100 {
            let f = i as f64 * 123.7;
            let d = (i as f64 * 0.013) % 2.0;
            assert_close(steering_value(f, d, 343.0).norm(), 1.0, 1e-12);
        }
    }

    #[test]
    fn track_weight_rule() {
        assert_eq!(track_weight(DirectionVector::new(0.3, 0.0, 0.0)), 0.01);
        assert_eq!(track_weight(DirectionVector::new(1.0, 2.0, 2.0)), 3.0);
        assert_eq!(track_weight(DirectionVector::new(0.5, 0.0, 0.0)), 0.5);
        assert_eq!(track_weight(DirectionVector::new(0.0, 1.0, 0.0)), 1.0);
    }

    #[test]
    fn tetrahedron_has_radius() {
        let g = MicArrayGeometry::tetrahedron(0.042);
        assert_eq!(g.n_capsules(), 4);
        for m in 0..4 {
            let p = g.position(m);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert_close(r, 0.042, 1e-12);
        }
    }

    fn single_track_labels(dir: DirectionVector, frames: usize) -> ClipLabels {
        let mut l = ClipLabels::empty(1, frames, 2);
        for t in 0..frames {
            l.set_active_frame(0, t, 0, dir);
        }
        l
    }

    fn random_spectrum(channels: usize, frames: usize, fft_size: usize) -> SpectralTensor {
        let mut spec = SpectralTensor::zeros(channels, frames, fft_size, 0.04, 0.02, 24000);
        let mut state = 0x12345678u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for ch in 0..channels {
            for t in 0..frames {
                for b in 0..spec.n_bins() {
                    spec.set_value(ch, t, b, Complex64::new(next(), next()));
                }
            }
        }
        spec
    }

    #[test]
    fn single_capsule_at_source_is_identity() {
        // Capsule placed at the source position: d = 0 and w = |pos| = 1,
        // so the output equals the input channel exactly.
        let geom = MicArrayGeometry::new(vec![[1.0, 0.0, 0.0]]).unwrap();
        let spec = random_spectrum(1, 3, 64);
        let labels = single_track_labels(DirectionVector::new(1.0, 0.0, 0.0), 1);
        let out = ds_beamform(&spec, &labels, &geom, &BeamformConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        for t in 0..3 {
            for b in 0..spec.n_bins() {
                let got = out[0].value(0, t, b);
                let expect = spec.value(0, t, b);
                assert_close(got.re, expect.re, 1e-12);
                assert_close(got.im, expect.im, 1e-12);
            }
        }
    }

    #[test]
    fn inactive_track_attenuates_by_inactive_weight() {
        let geom = MicArrayGeometry::new(vec![[0.0, 0.0, 0.0]]).unwrap();
        let spec = random_spectrum(1, 2, 64);
        // Never-active track: direction holds +x, capsule at origin gives
        // d = 1 for every frame; output = 0.01 * steered channel.
        let labels = ClipLabels::empty(1, 1, 2);
        let out = ds_beamform(&spec, &labels, &geom, &BeamformConfig::default()).unwrap();
        for t in 0..2 {
            for b in 0..spec.n_bins() {
                let f = spec.bin_frequency_hz(b);
                let expect =
                    steering_value(f, 1.0, SPEED_OF_SOUND).conj() * spec.value(0, t, b) * 0.01;
                let got = out[0].value(0, t, b);
                assert_close(got.re, expect.re, 1e-12);
                assert_close(got.im, expect.im, 1e-12);
            }
        }
    }

    #[test]
    fn coherent_plane_wave_gains_track_weight() {
        // Construct channel spectra carrying the propagation phases of a
        // source at the label position; after steering all channels align.
        let geom = MicArrayGeometry::tetrahedron(0.042);
        let dir = DirectionVector::new(0.6, 0.64, 0.48).normalized();
        let frames = 2;
        let fft_size = 128;
        let base = random_spectrum(1, frames, fft_size);
        let mut spec = SpectralTensor::zeros(4, frames, fft_size, 0.04, 0.02, 24000);
        let d_center = dir.norm();
        for m in 0..4 {
            let d_m = source_mic_distance(dir, geom.position(m));
            for t in 0..frames {
                for b in 0..spec.n_bins() {
                    let f = spec.bin_frequency_hz(b);
                    let phase = -core::f64::consts::TAU * f * (d_m - d_center) / 343.0;
                    let v = base.value(0, t, b) * Complex64::from_polar(1.0, phase);
                    spec.set_value(m, t, b, v);
                }
            }
        }
        let labels = single_track_labels(dir, 1);
        let out = ds_beamform(&spec, &labels, &geom, &BeamformConfig::default()).unwrap();
        for t in 0..frames {
            for b in 1..spec.n_bins() {
                let got = out[0].value(0, t, b).norm();
                let expect = base.value(0, t, b).norm(); // w = 1
                assert!(
                    (got - expect).abs() <= 1e-6 * expect.max(1e-12),
                    "bin {b}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn beamform_is_linear_in_input() {
        let geom = MicArrayGeometry::tetrahedron(0.042);
        let a = random_spectrum(4, 2, 64);
        let b = random_spectrum(4, 2, 64);
        let mut sum = SpectralTensor::zeros(4, 2, 64, 0.04, 0.02, 24000);
        for ch in 0..4 {
            for t in 0..2 {
                for bin in 0..sum.n_bins() {
                    sum.set_value(ch, t, bin, a.value(ch, t, bin) + b.value(ch, t, bin));
                }
            }
        }
        let labels = single_track_labels(DirectionVector::new(0.0, 1.0, 0.0), 1);
        let cfg = BeamformConfig::default();
        let ya = ds_beamform(&a, &labels, &geom, &cfg).unwrap();
        let yb = ds_beamform(&b, &labels, &geom, &cfg).unwrap();
        let ysum = ds_beamform(&sum, &labels, &geom, &cfg).unwrap();
        for t in 0..2 {
            for bin in 0..sum.n_bins() {
                let lhs = ysum[0].value(0, t, bin);
                let rhs = ya[0].value(0, t, bin) + yb[0].value(0, t, bin);
                assert_close(lhs.re, rhs.re, 1e-12);
                assert_close(lhs.im, rhs.im, 1e-12);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let geom = MicArrayGeometry::tetrahedron(0.042);
        let spec = random_spectrum(3, 1, 64);
        let labels = single_track_labels(DirectionVector::new(1.0, 0.0, 0.0), 1);
        assert_eq!(
            ds_beamform(&spec, &labels, &geom, &BeamformConfig::default()).unwrap_err(),
            BeamformError::ChannelMismatch {
                channels: 3,
                capsules: 4
            }
        );
    }

    #[test]
    fn steering_field_unit_modulus_and_hold() {
        let geom = MicArrayGeometry::tetrahedron(0.042);
        let spec = random_spectrum(4, 10, 64);
        // Active only on label frame 0 (frames 0..5 at 0.02 s hop / 0.1 s label hop).
        let mut labels = ClipLabels::empty(1, 2, 2);
        labels.set_active_frame(0, 0, 0, DirectionVector::new(0.0, 0.0, 1.0));
        let field =
            SteeringField::build(&labels, &geom, &spec, &BeamformConfig::default()).unwrap();
        for t in 0..10 {
            let expect_w = if t < 5 { 1.0 } else { INACTIVE_WEIGHT };
            assert_eq!(field.weight(0, t), expect_w, "frame {t}");
            for m in 0..4 {
                assert_close(field.value(0, m, t, 17).norm(), 1.0, 1e-9);
            }
        }
        // Direction holds +z after activity ends: distances stay constant.
        for m in 0..4 {
            assert_close(field.distance(0, m, 9), field.distance(0, m, 0), 1e-12);
        }
    }
}
