//! Scene and pipeline configuration files.
//!
//! Scene configs are JSON documents (schema documented in `docs/`); pipeline
//! configs are flat JSON overlays whose present fields take precedence over
//! command-line flags.

use std::path::{Path, PathBuf};

use seld_core::geometry::AzEl;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{EventSpec, SceneConfig, SignalSource, DEFAULT_ARRAY_RADIUS_M};
use crate::wav::read_wav;

pub const DEFAULT_WINDOW_S: f64 = 0.04;
pub const DEFAULT_HOP_S: f64 = 0.02;
pub const DEFAULT_N_MELS: usize = 64;
pub const DEFAULT_LABEL_HOP_S: f64 = 0.1;
pub const DEFAULT_SAMPLE_RATE: u32 = 24000;
pub const DEFAULT_ACTIVITY_THRESHOLD_DB: f64 = -40.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse failed: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("event wav '{path}' must be mono, has {channels} channels")]
    NotMono { path: PathBuf, channels: usize },
    #[error("event wav '{path}' is sampled at {got} Hz, scene wants {want} Hz")]
    SampleRateMismatch { path: PathBuf, got: u32, want: u32 },
    #[error(transparent)]
    Wav(#[from] crate::wav::WavError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryPointDto {
    t_s: f64,
    azimuth_deg: f64,
    elevation_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum SignalDto {
    Tone { freq_hz: f64 },
    Noise,
    Wav { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDto {
    class_id: usize,
    onset_s: f64,
    offset_s: f64,
    signal: SignalDto,
    trajectory: Vec<TrajectoryPointDto>,
    #[serde(default = "default_gain")]
    gain: f64,
}

fn default_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDto {
    duration_s: f64,
    #[serde(default = "default_sample_rate")]
    sample_rate: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    noise_snr_db: Option<f64>,
    #[serde(default = "default_radius")]
    array_radius_m: f64,
    #[serde(default)]
    events: Vec<EventDto>,
}

fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}

fn default_radius() -> f64 {
    DEFAULT_ARRAY_RADIUS_M
}

/// Load a scene config, resolving event wav paths relative to the file.
pub fn load_scene(path: &Path) -> Result<SceneConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let dto: SceneDto = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut events = Vec::with_capacity(dto.events.len());
    for ev in dto.events {
        let signal = match ev.signal {
            SignalDto::Tone { freq_hz } => SignalSource::Tone { freq_hz },
            SignalDto::Noise => SignalSource::NoiseBurst,
            SignalDto::Wav { path: wav_path } => {
                let resolved = if wav_path.is_absolute() {
                    wav_path.clone()
                } else {
                    base.join(&wav_path)
                };
                let clip = read_wav(&resolved)?;
                if clip.n_channels() != 1 {
                    return Err(ConfigError::NotMono {
                        path: resolved,
                        channels: clip.n_channels(),
                    });
                }
                if clip.sample_rate() != dto.sample_rate {
                    return Err(ConfigError::SampleRateMismatch {
                        path: resolved,
                        got: clip.sample_rate(),
                        want: dto.sample_rate,
                    });
                }
                SignalSource::Samples(clip.into_channels().remove(0))
            }
        };
        events.push(EventSpec {
            class_id: ev.class_id,
            onset_s: ev.onset_s,
            offset_s: ev.offset_s,
            trajectory: ev
                .trajectory
                .iter()
                .map(|p| (p.t_s, AzEl::new(p.azimuth_deg, p.elevation_deg)))
                .collect(),
            signal,
            gain: ev.gain,
        });
    }

    Ok(SceneConfig {
        duration_s: dto.duration_s,
        sample_rate: dto.sample_rate,
        events,
        noise_snr_db: dto.noise_snr_db,
        array_radius_m: dto.array_radius_m,
        seed: dto.seed,
    })
}

/// Fully resolved pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scene_path: Option<PathBuf>,
    pub foa_wav: Option<PathBuf>,
    pub mic_wav: Option<PathBuf>,
    pub metadata_csv: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub window_s: f64,
    pub hop_s: f64,
    pub n_mels: usize,
    pub label_hop_s: f64,
    pub n_tracks: usize,
    pub n_classes: usize,
    pub speed_of_sound: f64,
    pub array_radius_m: f64,
    pub activity_threshold_db: f64,
    /// Overrides the scene seed when set.
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn with_out_dir(out_dir: PathBuf) -> Self {
        PipelineConfig {
            scene_path: None,
            foa_wav: None,
            mic_wav: None,
            metadata_csv: None,
            out_dir,
            window_s: DEFAULT_WINDOW_S,
            hop_s: DEFAULT_HOP_S,
            n_mels: DEFAULT_N_MELS,
            label_hop_s: DEFAULT_LABEL_HOP_S,
            n_tracks: seld_core::trackwise::DEFAULT_TRACKS,
            n_classes: seld_core::trackwise::DEFAULT_CLASSES,
            speed_of_sound: seld_core::beamform::SPEED_OF_SOUND,
            array_radius_m: DEFAULT_ARRAY_RADIUS_M,
            activity_threshold_db: DEFAULT_ACTIVITY_THRESHOLD_DB,
            seed: None,
        }
    }

    /// Feature frames per label frame.
    pub fn frames_per_label(&self) -> usize {
        (self.label_hop_s / self.hop_s).round().max(1.0) as usize
    }
}

/// Optional-field overlay read from a pipeline config file. Present fields
/// take precedence over flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOverlay {
    #[serde(default)]
    pub scene: Option<PathBuf>,
    #[serde(default)]
    pub foa_wav: Option<PathBuf>,
    #[serde(default)]
    pub mic_wav: Option<PathBuf>,
    #[serde(default)]
    pub metadata_csv: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub window_s: Option<f64>,
    #[serde(default)]
    pub hop_s: Option<f64>,
    #[serde(default)]
    pub n_mels: Option<usize>,
    #[serde(default)]
    pub label_hop_s: Option<f64>,
    #[serde(default)]
    pub n_tracks: Option<usize>,
    #[serde(default)]
    pub n_classes: Option<usize>,
    #[serde(default)]
    pub speed_of_sound: Option<f64>,
    #[serde(default)]
    pub array_radius_m: Option<f64>,
    #[serde(default)]
    pub activity_threshold_db: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PipelineOverlay {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn apply(&self, cfg: &mut PipelineConfig) {
        macro_rules! overlay {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = &self.$field { cfg.$target = v.clone().into(); })*
            };
        }
        overlay!(
            scene => scene_path,
            foa_wav => foa_wav,
            mic_wav => mic_wav,
            metadata_csv => metadata_csv,
        );
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.window_s {
            cfg.window_s = v;
        }
        if let Some(v) = self.hop_s {
            cfg.hop_s = v;
        }
        if let Some(v) = self.n_mels {
            cfg.n_mels = v;
        }
        if let Some(v) = self.label_hop_s {
            cfg.label_hop_s = v;
        }
        if let Some(v) = self.n_tracks {
            cfg.n_tracks = v;
        }
        if let Some(v) = self.n_classes {
            cfg.n_classes = v;
        }
        if let Some(v) = self.speed_of_sound {
            cfg.speed_of_sound = v;
        }
        if let Some(v) = self.array_radius_m {
            cfg.array_radius_m = v;
        }
        if let Some(v) = self.activity_threshold_db {
            cfg.activity_threshold_db = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = Some(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        std::fs::write(
            &path,
            r#"{
                "duration_s": 2.0,
                "seed": 9,
                "noise_snr_db": 10.0,
                "events": [
                    {
                        "class_id": 3,
                        "onset_s": 0.25,
                        "offset_s": 1.75,
                        "signal": {"kind": "tone", "freq_hz": 880.0},
                        "trajectory": [
                            {"t_s": 0.25, "azimuth_deg": 30.0, "elevation_deg": 0.0},
                            {"t_s": 1.75, "azimuth_deg": 60.0, "elevation_deg": 10.0}
                        ]
                    }
                ]
            }"#,
        )
        .unwrap();
        let scene = load_scene(&path).unwrap();
        assert_eq!(scene.duration_s, 2.0);
        assert_eq!(scene.sample_rate, 24000);
        assert_eq!(scene.seed, 9);
        assert_eq!(scene.noise_snr_db, Some(10.0));
        assert_eq!(scene.events.len(), 1);
        assert_eq!(scene.events[0].class_id, 3);
        assert!(matches!(
            scene.events[0].signal,
            SignalSource::Tone { freq_hz } if freq_hz == 880.0
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        std::fs::write(&path, r#"{"duration_s": 1.0, "bogus": true}"#).unwrap();
        assert!(matches!(
            load_scene(&path).unwrap_err(),
            ConfigError::Parse(_)
        ));
    }

    #[test]
    fn wav_signal_loads_relative_to_scene() {
        let dir = tempfile::tempdir().unwrap();
        let wav_path = dir.path().join("src.wav");
        let clip = seld_core::clip::AudioClip::from_mono(vec![0.5; 100], 24000);
        crate::wav::write_wav(&wav_path, &clip).unwrap();
        let path = dir.path().join("scene.json");
        std::fs::write(
            &path,
            r#"{
                "duration_s": 1.0,
                "events": [{
                    "class_id": 0, "onset_s": 0.0, "offset_s": 0.004,
                    "signal": {"kind": "wav", "path": "src.wav"},
                    "trajectory": [
                        {"t_s": 0.0, "azimuth_deg": 0.0, "elevation_deg": 0.0},
                        {"t_s": 1.0, "azimuth_deg": 0.0, "elevation_deg": 0.0}
                    ]
                }]
            }"#,
        )
        .unwrap();
        let scene = load_scene(&path).unwrap();
        match &scene.events[0].signal {
            SignalSource::Samples(s) => assert_eq!(s.len(), 100),
            other => panic!("unexpected signal {other:?}"),
        }
    }

    #[test]
    fn overlay_takes_precedence() {
        let mut cfg = PipelineConfig::with_out_dir(PathBuf::from("flags"));
        cfg.n_mels = 32;
        let overlay = PipelineOverlay {
            out_dir: Some(PathBuf::from("file")),
            n_mels: Some(64),
            seed: Some(5),
            ..PipelineOverlay::default()
        };
        overlay.apply(&mut cfg);
        assert_eq!(cfg.out_dir, PathBuf::from("file"));
        assert_eq!(cfg.n_mels, 64);
        assert_eq!(cfg.seed, Some(5));
        // Untouched fields keep flag values.
        assert_eq!(cfg.window_s, DEFAULT_WINDOW_S);
    }

    #[test]
    fn frames_per_label_from_defaults() {
        let cfg = PipelineConfig::with_out_dir(PathBuf::from("x"));
        assert_eq!(cfg.frames_per_label(), 5);
    }
}
