//! Synthetic spatial scene generation.
//!
//! Builds first-order-ambisonics clips (ACN/SN3D-style gains with channel
//! order W, X, Y, Z and unit-gain W), simulates a small microphone array,
//! and emits trackwise ground-truth labels. Sources sit on the unit sphere:
//! label directions are unit vectors and the array renderer places sources
//! at 1 m, so capsule delays reduce to the far-field plane-wave delay
//! `-(p . n)/c` up to a fraction of a sample.
//!
//! All randomness derives from the scene seed, with one stream per event and
//! per noise channel, so renders are bit-identical across runs regardless of
//! evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seld_core::beamform::MicArrayGeometry;
use seld_core::clip::AudioClip;
use seld_core::geometry::{azel_to_unit, AzEl, DirectionVector};
use seld_core::trackwise::{reorder_events, ClipLabels, EventInstance, TrackwiseError};
use thiserror::Error;

use crate::stft::{istft, stft, StftError};

/// Source distance assumed by the renderer, matching the unit-norm labels.
pub const SOURCE_DISTANCE_M: f64 = 1.0;

/// Default tetrahedral array radius in meters.
pub const DEFAULT_ARRAY_RADIUS_M: f64 = 0.042;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("more than {max_tracks} concurrent events at label frame {frame}")]
    ConcurrencyOverflow { frame: usize, max_tracks: usize },
    #[error(transparent)]
    Trackwise(#[from] TrackwiseError),
    #[error(transparent)]
    Stft(#[from] StftError),
}

/// Mono source material for one event.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSource {
    /// Pure sine at the given frequency.
    Tone { freq_hz: f64 },
    /// White Gaussian noise burst, unit standard deviation.
    NoiseBurst,
    /// Caller-provided mono samples at the scene sample rate.
    Samples(Vec<f64>),
}

/// One sound event: class, time span, movement, and source material.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    pub class_id: usize,
    pub onset_s: f64,
    pub offset_s: f64,
    /// Waypoints (time, direction); times must be ascending and cover
    /// [onset, offset]. Directions interpolate spherically between them.
    pub trajectory: Vec<(f64, AzEl)>,
    pub signal: SignalSource,
    pub gain: f64,
}

impl EventSpec {
    /// Static event helper: one direction for the whole span.
    pub fn static_event(
        class_id: usize,
        onset_s: f64,
        offset_s: f64,
        direction: AzEl,
        signal: SignalSource,
    ) -> Self {
        EventSpec {
            class_id,
            onset_s,
            offset_s,
            trajectory: vec![(onset_s, direction), (offset_s, direction)],
            signal,
            gain: 1.0,
        }
    }
}

/// A full scene: duration, events, noise, and the master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub events: Vec<EventSpec>,
    /// Diffuse white noise level relative to the clean signal power, dB.
    pub noise_snr_db: Option<f64>,
    pub array_radius_m: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            duration_s: 1.0,
            sample_rate: 24000,
            events: Vec::new(),
            noise_snr_db: None,
            array_radius_m: DEFAULT_ARRAY_RADIUS_M,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn geometry(&self) -> MicArrayGeometry {
        MicArrayGeometry::tetrahedron(self.array_radius_m)
    }

    fn validate(&self) -> Result<Vec<String>, SceneError> {
        if !(self.duration_s > 0.0) || self.sample_rate == 0 {
            return Err(SceneError::Invalid(
                "duration and sample rate must be positive".into(),
            ));
        }
        let mut warnings = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.onset_s < ev.offset_s) || ev.onset_s < 0.0 {
                return Err(SceneError::Invalid(format!(
                    "event {i}: onset must precede offset"
                )));
            }
            if ev.trajectory.is_empty() {
                return Err(SceneError::Invalid(format!("event {i}: empty trajectory")));
            }
            if ev
                .trajectory
                .windows(2)
                .any(|w| w[1].0 < w[0].0)
            {
                return Err(SceneError::Invalid(format!(
                    "event {i}: trajectory times must be ascending"
                )));
            }
            let first = ev.trajectory[0].0;
            let last = ev.trajectory[ev.trajectory.len() - 1].0;
            if first > ev.onset_s || last < ev.offset_s.min(self.duration_s) {
                return Err(SceneError::Invalid(format!(
                    "event {i}: trajectory must cover the event span"
                )));
            }
            for &(_, azel) in &ev.trajectory {
                if !azel.in_range() {
                    return Err(SceneError::Invalid(format!(
                        "event {i}: trajectory angle out of range"
                    )));
                }
            }
            if ev.offset_s > self.duration_s {
                warnings.push(format!(
                    "event {i} (class {}) extends past scene end; clipped at {:.3} s",
                    ev.class_id, self.duration_s
                ));
            }
        }
        Ok(warnings)
    }
}

/// Spherical linear interpolation between unit vectors.
fn slerp(a: DirectionVector, b: DirectionVector, u: f64) -> DirectionVector {
    let dot = a.dot(&b).clamp(-1.0, 1.0);
    let omega = dot.acos();
    let sin_omega = omega.sin();
    if sin_omega < 1e-9 {
        // Coincident (or degenerate antipodal) waypoints: hold the start.
        return a;
    }
    let wa = ((1.0 - u) * omega).sin() / sin_omega;
    let wb = (u * omega).sin() / sin_omega;
    DirectionVector::new(
        wa * a.x + wb * b.x,
        wa * a.y + wb * b.y,
        wa * a.z + wb * b.z,
    )
    .normalized()
}

/// Direction of an event at an absolute time, clamped to the trajectory.
fn trajectory_direction(ev: &EventSpec, t_s: f64) -> DirectionVector {
    let points = &ev.trajectory;
    let first = points[0];
    let last = points[points.len() - 1];
    let unit = |azel: AzEl| azel_to_unit(azel).expect("validated trajectory angle");
    if t_s <= first.0 {
        return unit(first.1);
    }
    if t_s >= last.0 {
        return unit(last.1);
    }
    for w in points.windows(2) {
        let (t0, a0) = w[0];
        let (t1, a1) = w[1];
        if t_s <= t1 {
            if t1 <= t0 {
                return unit(a1);
            }
            let u = (t_s - t0) / (t1 - t0);
            return slerp(unit(a0), unit(a1), u);
        }
    }
    unit(last.1)
}

pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

const NOISE_STREAM_BASE: u64 = 0x4E4F4953; // distinct stream space for noise

/// Mono samples of one event over its (clipped) span.
fn event_signal(ev: &EventSpec, index: usize, scene: &SceneConfig, span: usize) -> Vec<f64> {
    let sr = scene.sample_rate as f64;
    match &ev.signal {
        SignalSource::Tone { freq_hz } => (0..span)
            .map(|n| ev.gain * (std::f64::consts::TAU * freq_hz * n as f64 / sr).sin())
            .collect(),
        SignalSource::NoiseBurst => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scene.seed, index as u64 + 1));
            (0..span).map(|_| ev.gain * gaussian(&mut rng)).collect()
        }
        SignalSource::Samples(data) => (0..span)
            .map(|n| ev.gain * data.get(n).copied().unwrap_or(0.0))
            .collect(),
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on two uniforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn event_span_samples(ev: &EventSpec, scene: &SceneConfig) -> (usize, usize) {
    let sr = scene.sample_rate as f64;
    let start = (ev.onset_s * sr).round() as usize;
    let end = ((ev.offset_s.min(scene.duration_s)) * sr).round() as usize;
    let total = (scene.duration_s * sr).round() as usize;
    (start.min(total), end.min(total))
}

fn mean_power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        0.0
    } else {
        samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
    }
}

pub(crate) fn white_noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sigma * gaussian(&mut rng)).collect()
}

/// Clean FoA mixture and the separately generated noise floor (when
/// configured). The noise level targets the requested SNR against the clean
/// W-channel power; every channel carries an independent stream.
pub fn encode_foa_parts(
    scene: &SceneConfig,
) -> Result<(AudioClip, Option<AudioClip>, Vec<String>), SceneError> {
    let mut warnings = scene.validate()?;
    let sr = scene.sample_rate;
    let total = (scene.duration_s * sr as f64).round() as usize;
    let mut clean = AudioClip::silent(4, total, sr);

    for (i, ev) in scene.events.iter().enumerate() {
        let (start, end) = event_span_samples(ev, scene);
        if start >= end {
            warnings.push(format!("event {i} (class {}) has no samples", ev.class_id));
            continue;
        }
        let signal = event_signal(ev, i, scene, end - start);
        for (n, &s) in signal.iter().enumerate() {
            let t_abs = (start + n) as f64 / sr as f64;
            let d = trajectory_direction(ev, t_abs);
            clean.channel_mut(0)[start + n] += s;
            clean.channel_mut(1)[start + n] += s * d.x;
            clean.channel_mut(2)[start + n] += s * d.y;
            clean.channel_mut(3)[start + n] += s * d.z;
        }
    }

    let noise = match scene.noise_snr_db {
        None => None,
        Some(snr_db) => {
            let signal_power = mean_power(clean.channel(0));
            if signal_power == 0.0 {
                warnings.push("noise requested for a silent scene; skipped".into());
                None
            } else {
                let sigma = (signal_power / 10f64.powf(snr_db / 10.0)).sqrt();
                let mut noise = AudioClip::silent(4, total, sr);
                for ch in 0..4 {
                    *noise.channel_mut(ch) = white_noise(
                        total,
                        sigma,
                        mix_seed(scene.seed, NOISE_STREAM_BASE + ch as u64),
                    );
                }
                Some(noise)
            }
        }
    };
    Ok((clean, noise, warnings))
}

/// Encode a scene to 4-channel first-order ambisonics (W, X, Y, Z), including
/// the configured noise floor.
pub fn encode_foa(scene: &SceneConfig) -> Result<(AudioClip, Vec<String>), SceneError> {
    let (clean, noise, warnings) = encode_foa_parts(scene)?;
    Ok((sum_clips(clean, noise), warnings))
}

fn sum_clips(mut base: AudioClip, extra: Option<AudioClip>) -> AudioClip {
    if let Some(extra) = extra {
        for ch in 0..base.n_channels() {
            let dst = base.channel_mut(ch);
            for (d, s) in dst.iter_mut().zip(extra.channel(ch)) {
                *d += s;
            }
        }
    }
    base
}

/// STFT framing used when rendering capsule delays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub speed_of_sound: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            window_s: 0.04,
            hop_s: 0.02,
            speed_of_sound: seld_core::beamform::SPEED_OF_SOUND,
        }
    }
}

/// Clean microphone-array render plus the separately generated per-capsule
/// noise floor (when configured).
///
/// Each event is delayed per capsule by the wavefront of a source at
/// [`SOURCE_DISTANCE_M`] along its direction, applied as a frequency-domain
/// phase shift per STFT frame (direction held at the frame center).
pub fn render_micarray_parts(
    scene: &SceneConfig,
    geom: &MicArrayGeometry,
    cfg: &RenderConfig,
) -> Result<(AudioClip, Option<AudioClip>, Vec<String>), SceneError> {
    let mut warnings = scene.validate()?;
    let sr = scene.sample_rate;
    let total = (scene.duration_s * sr as f64).round() as usize;
    let m_count = geom.n_capsules();
    let mut clean = AudioClip::silent(m_count, total, sr);

    let window = (cfg.window_s * sr as f64).round() as usize;
    let hop = (cfg.hop_s * sr as f64).round() as usize;
    let pad_front = hop;
    let pad_back = 3 * hop;

    for (i, ev) in scene.events.iter().enumerate() {
        let (start, end) = event_span_samples(ev, scene);
        if start >= end {
            warnings.push(format!("event {i} (class {}) has no samples", ev.class_id));
            continue;
        }
        let signal = event_signal(ev, i, scene, end - start);
        let mut mono = vec![0.0f64; pad_front + total + pad_back];
        mono[pad_front + start..pad_front + end].copy_from_slice(&signal);
        let spec = stft(
            &AudioClip::from_mono(mono, sr),
            cfg.window_s,
            cfg.hop_s,
        )?;

        for m in 0..m_count {
            let mut shifted = spec.clone();
            let capsule = geom.position(m);
            for t in 0..shifted.n_frames() {
                let center =
                    (t * hop + window / 2) as f64 - pad_front as f64;
                let t_abs = (center / sr as f64)
                    .clamp(ev.onset_s, ev.offset_s.min(scene.duration_s));
                let n = trajectory_direction(ev, t_abs);
                let pos = n.scale(SOURCE_DISTANCE_M);
                let d_m = seld_core::beamform::source_mic_distance(pos, capsule);
                let tau = (d_m - SOURCE_DISTANCE_M) / cfg.speed_of_sound;
                let frame = shifted.frame_mut(0, t);
                for (bin, value) in frame.iter_mut().enumerate() {
                    let f_hz = bin as f64 * sr as f64 / window as f64;
                    *value *= rustfft::num_complex::Complex64::from_polar(
                        1.0,
                        -std::f64::consts::TAU * f_hz * tau,
                    );
                }
            }
            let rendered = istft(&shifted)?;
            let src = rendered.channel(0);
            let dst = clean.channel_mut(m);
            for n in 0..total {
                dst[n] += src[pad_front + n];
            }
        }
    }

    let noise = match scene.noise_snr_db {
        None => None,
        Some(snr_db) => {
            let signal_power = mean_power(clean.channel(0));
            if signal_power == 0.0 {
                warnings.push("noise requested for a silent scene; skipped".into());
                None
            } else {
                let sigma = (signal_power / 10f64.powf(snr_db / 10.0)).sqrt();
                let mut noise = AudioClip::silent(m_count, total, sr);
                for m in 0..m_count {
                    *noise.channel_mut(m) = white_noise(
                        total,
                        sigma,
                        mix_seed(scene.seed, NOISE_STREAM_BASE + 0x100 + m as u64),
                    );
                }
                Some(noise)
            }
        }
    };
    Ok((clean, noise, warnings))
}

/// Render the scene at a microphone array, including the configured noise.
pub fn render_micarray(
    scene: &SceneConfig,
    geom: &MicArrayGeometry,
    cfg: &RenderConfig,
) -> Result<(AudioClip, Vec<String>), SceneError> {
    let (clean, noise, warnings) = render_micarray_parts(scene, geom, cfg)?;
    Ok((sum_clips(clean, noise), warnings))
}

/// Trackwise ground-truth labels at the label frame rate.
///
/// A frame is active for an event when the frame center falls inside the
/// event span; directions are the trajectory at frame centers. Events are
/// assigned to tracks by the stable first-fit reordering.
pub fn ground_truth_labels(
    scene: &SceneConfig,
    label_hop_s: f64,
    n_tracks: usize,
    n_classes: usize,
) -> Result<ClipLabels, SceneError> {
    scene.validate()?;
    if !(label_hop_s > 0.0) {
        return Err(SceneError::Invalid("label hop must be positive".into()));
    }
    let n_frames = (scene.duration_s / label_hop_s).round().max(1.0) as usize;

    let mut events = Vec::new();
    for ev in &scene.events {
        let offset_s = ev.offset_s.min(scene.duration_s);
        let mut frames = Vec::new();
        for t in 0..n_frames {
            let center = (t as f64 + 0.5) * label_hop_s;
            if center >= ev.onset_s && center < offset_s {
                frames.push((t, trajectory_direction(ev, center)));
            }
        }
        if let (Some(&(first, _)), Some(&(last, _))) = (frames.first(), frames.last()) {
            events.push(EventInstance::new(
                ev.class_id,
                first,
                last + 1,
                frames.into_iter().map(|(_, d)| d).collect(),
            ));
        }
    }

    for frame in 0..n_frames {
        let concurrent = events
            .iter()
            .filter(|e| frame >= e.onset_frame && frame < e.offset_frame)
            .count();
        if concurrent > n_tracks {
            return Err(SceneError::ConcurrencyOverflow {
                frame,
                max_tracks: n_tracks,
            });
        }
    }

    Ok(reorder_events(&events, n_tracks, n_frames, n_classes)?)
}
