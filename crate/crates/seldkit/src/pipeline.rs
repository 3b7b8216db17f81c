//! End-to-end pipeline orchestration.
//!
//! Each stage is a file-to-file function; the `pipeline` entry point chains
//! the same stage functions the CLI subcommands call, so a composed run and
//! a pipeline run produce identical artifacts. All artifacts are
//! deterministic under a fixed seed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use seld_core::beamform::{ds_beamform, BeamformConfig, MicArrayGeometry, SteeringField};
use seld_core::clip::AudioClip;
use seld_core::doa::{estimate_doa_iv, DoaConfig};
use seld_core::metrics::{
    compute_seld_metrics, doa_metrics, segment_f_macro, FrameEvents, MetricsError,
    SeldMetricsConfig,
};
use seld_core::spectral::{
    assemble_features, intensity_vectors, logmel, FeatureLayout, FeatureTensor, SpectralTensor,
    LOG_FLOOR,
};
use seld_core::trackwise::{
    parse_metadata_csv, reorder_events, serialize_metadata_csv, serialize_track_csv, ClipLabels,
    EventInstance, ACTIVITY_THRESHOLD,
};

use crate::config::PipelineConfig;
use crate::report::{MetricsReport, TrackGain};
use crate::scene::{
    encode_foa, ground_truth_labels, mix_seed, render_micarray_parts, white_noise, RenderConfig,
    SceneConfig,
};
use crate::stft::{istft, stft};
use crate::tensor::{read_tensor, write_tensor};
use crate::wav::{read_wav, write_wav};

/// Canonical artifact names within an output directory.
pub mod artifact {
    pub const FOA_WAV: &str = "foa.wav";
    pub const MIC_WAV: &str = "mic.wav";
    pub const REF_CSV: &str = "ref_metadata.csv";
    pub const FEATURES: &str = "features.tnsr";
    pub const PREDICTED_CSV: &str = "predicted.csv";
    pub const PREDICTED_TRACKS_CSV: &str = "predicted_tracks.csv";
    pub const METRICS_TXT: &str = "metrics.txt";
    pub const METRICS_CSV: &str = "metrics.csv";
    pub const WARNINGS_LOG: &str = "warnings.log";

    pub fn track_wav(track: usize) -> String {
        format!("track_{track}.wav")
    }
}

/// Result of a pipeline run.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: MetricsReport,
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Simulate a scene: FoA wav, microphone-array wav, and reference metadata.
pub fn stage_simulate(
    scene: &SceneConfig,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<Vec<String>> {
    fs::create_dir_all(out_dir)?;
    let mut warnings = Vec::new();

    let (foa, mut w) = encode_foa(scene).context("encoding FoA")?;
    warnings.append(&mut w);
    write_wav(&out_dir.join(artifact::FOA_WAV), &foa)?;

    let geom = scene.geometry();
    let render = RenderConfig {
        window_s: cfg.window_s,
        hop_s: cfg.hop_s,
        speed_of_sound: cfg.speed_of_sound,
    };
    let (clean, noise, mut w) = render_micarray_parts(scene, &geom, &render)?;
    warnings.append(&mut w);
    let mut mic = clean;
    if let Some(noise) = noise {
        for ch in 0..mic.n_channels() {
            let dst = mic.channel_mut(ch);
            for (d, s) in dst.iter_mut().zip(noise.channel(ch)) {
                *d += s;
            }
        }
    }
    write_wav(&out_dir.join(artifact::MIC_WAV), &mic)?;

    let labels = ground_truth_labels(scene, cfg.label_hop_s, cfg.n_tracks, cfg.n_classes)?;
    let events = labels.extract_instances(ACTIVITY_THRESHOLD);
    fs::write(
        out_dir.join(artifact::REF_CSV),
        serialize_metadata_csv(&events),
    )?;
    Ok(warnings)
}

/// Compute the combined 7 x T x n_mels feature tensor from a FoA wav.
pub fn stage_features(
    foa_wav: &Path,
    cfg: &PipelineConfig,
    out_tensor: &Path,
) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    let clip = read_wav(foa_wav).with_context(|| format!("reading {}", foa_wav.display()))?;
    if clip.sample_rate() != crate::config::DEFAULT_SAMPLE_RATE {
        warnings.push(format!(
            "input sampled at {} Hz; the reference pipeline assumes 24 kHz (no resampling is applied)",
            clip.sample_rate()
        ));
    }
    let spec = stft(&clip, cfg.window_s, cfg.hop_s)?;
    let logmels = logmel(&spec, cfg.n_mels, LOG_FLOOR)?;
    let ivs = intensity_vectors(&spec, cfg.n_mels)?;
    let combined = assemble_features(&logmels, &ivs)?;
    let values: Vec<f32> = combined.values().iter().map(|&v| v as f32).collect();
    write_tensor(
        out_tensor,
        &[
            combined.n_channels(),
            combined.n_frames(),
            combined.n_bands(),
        ],
        &values,
    )?;
    Ok(warnings)
}

fn features_from_file(path: &Path) -> Result<(FeatureTensor, FeatureTensor)> {
    let (dims, values) = read_tensor(path)?;
    if dims.len() != 3 || dims[0] != 7 {
        bail!(
            "expected a 7 x frames x bands combined feature tensor, got dims {dims:?} in {}",
            path.display()
        );
    }
    let (n_frames, n_bands) = (dims[1], dims[2]);
    let plane = n_frames * n_bands;
    let slice_f64 = |range: std::ops::Range<usize>| -> Vec<f64> {
        values[range].iter().map(|&v| v as f64).collect()
    };
    let logmels = FeatureTensor::new(
        slice_f64(0..plane),
        1,
        n_frames,
        n_bands,
        FeatureLayout::LogMel,
    )
    .expect("sized slice");
    let ivs = FeatureTensor::new(
        slice_f64(4 * plane..7 * plane),
        3,
        n_frames,
        n_bands,
        FeatureLayout::Iv,
    )
    .expect("sized slice");
    Ok((logmels, ivs))
}

/// Run the intensity-vector DoA estimator over a stored feature tensor and
/// write predicted metadata. Event classes are taken from the reference
/// metadata (nearest active label frame): this toolkit estimates directions
/// with a classical oracle and leaves event classification to the reference.
pub fn stage_predict(
    features: &Path,
    ref_csv: Option<&Path>,
    cfg: &PipelineConfig,
    out_csv: &Path,
) -> Result<(Vec<EventInstance>, Vec<String>)> {
    let mut warnings = Vec::new();
    let (logmels, ivs) = features_from_file(features)?;
    let estimate = estimate_doa_iv(
        &ivs,
        &logmels,
        &DoaConfig {
            activity_threshold_db: cfg.activity_threshold_db,
            frames_per_label: cfg.frames_per_label(),
        },
    )?;

    // Classes per label frame from the reference, when available.
    let ref_classes: Vec<Vec<usize>> = match ref_csv {
        Some(path) => {
            let events = parse_metadata_csv(&fs::read_to_string(path)?, cfg.n_classes)?;
            let mut per_frame = vec![Vec::new(); estimate.n_frames()];
            for ev in &events {
                for t in ev.onset_frame..ev.offset_frame.min(per_frame.len()) {
                    per_frame[t].push(ev.class_id);
                }
            }
            for classes in &mut per_frame {
                classes.sort_unstable();
                classes.dedup();
            }
            per_frame
        }
        None => vec![Vec::new(); estimate.n_frames()],
    };
    let any_ref = ref_classes.iter().any(|c| !c.is_empty());

    let class_for_frame = |t: usize| -> Option<usize> {
        if let Some(&c) = ref_classes[t].first() {
            return Some(c);
        }
        if !any_ref {
            return None;
        }
        let mut best: Option<(usize, usize)> = None; // (distance, class)
        for (f, classes) in ref_classes.iter().enumerate() {
            if let Some(&c) = classes.first() {
                let d = t.abs_diff(f);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, c));
                }
            }
        }
        best.map(|(_, c)| c)
    };

    let mut events: Vec<EventInstance> = Vec::new();
    let mut run: Option<(usize, usize, Vec<seld_core::geometry::DirectionVector>)> = None;
    let mut dropped = 0usize;
    for t in 0..estimate.n_frames() {
        let active = estimate.activity(0, t) >= ACTIVITY_THRESHOLD;
        let class = if active { class_for_frame(t) } else { None };
        if active && class.is_none() {
            dropped += 1;
        }
        match (&mut run, class) {
            (Some((c, _onset, dirs)), Some(class)) if *c == class => {
                dirs.push(estimate.direction(0, t));
            }
            (current, next) => {
                if let Some((c, onset, dirs)) = current.take() {
                    let offset = onset + dirs.len();
                    events.push(EventInstance::new(c, onset, offset, dirs));
                }
                if let Some(class) = next {
                    *current = Some((class, t, vec![estimate.direction(0, t)]));
                }
            }
        }
    }
    if let Some((c, onset, dirs)) = run.take() {
        let offset = onset + dirs.len();
        events.push(EventInstance::new(c, onset, offset, dirs));
    }
    if dropped > 0 {
        warnings.push(format!(
            "{dropped} active label frames dropped: no reference class available"
        ));
    }

    fs::write(out_csv, serialize_metadata_csv(&events))?;
    Ok((events, warnings))
}

/// Reorder metadata into stable tracks and write the trackwise CSV
/// (source column = track index).
pub fn stage_reorder(
    in_csv: &Path,
    out_csv: &Path,
    n_tracks: usize,
    n_classes: usize,
    n_frames: Option<usize>,
) -> Result<ClipLabels> {
    let events = parse_metadata_csv(&fs::read_to_string(in_csv)?, n_classes)?;
    let n_frames = n_frames
        .unwrap_or_else(|| events.iter().map(|e| e.offset_frame).max().unwrap_or(0))
        .max(1);
    let labels = reorder_events(&events, n_tracks, n_frames, n_classes)?;
    fs::write(out_csv, serialize_track_csv(&labels))?;
    Ok(labels)
}

/// Beamform a microphone-array wav along trackwise trajectories; writes one
/// mono wav per track and returns their paths.
pub fn stage_beamform(
    mic_wav: &Path,
    metadata_csv: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let clip = read_wav(mic_wav).with_context(|| format!("reading {}", mic_wav.display()))?;
    let geom = MicArrayGeometry::tetrahedron(cfg.array_radius_m);
    let n_frames_labels =
        (clip.duration_s() / cfg.label_hop_s).round().max(1.0) as usize;

    let events = parse_metadata_csv(&fs::read_to_string(metadata_csv)?, cfg.n_classes)?;
    let label_frames = n_frames_labels
        .max(events.iter().map(|e| e.offset_frame).max().unwrap_or(0));
    let trajectories = reorder_events(&events, cfg.n_tracks, label_frames, cfg.n_classes)?;

    let spec = stft(&clip, cfg.window_s, cfg.hop_s)?;
    let beam_cfg = BeamformConfig {
        speed_of_sound: cfg.speed_of_sound,
        label_hop_s: cfg.label_hop_s,
    };
    let outputs = ds_beamform(&spec, &trajectories, &geom, &beam_cfg)?;

    let mut paths = Vec::with_capacity(outputs.len());
    for (k, track_spec) in outputs.iter().enumerate() {
        let track = istft(track_spec)?;
        let path = out_dir.join(artifact::track_wav(k));
        write_wav(&path, &track)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Evaluate predicted metadata against a reference.
pub fn stage_evaluate(
    pred_csv: &Path,
    ref_csv: &Path,
    cfg: &PipelineConfig,
    n_frames: Option<usize>,
) -> Result<MetricsReport> {
    let pred_events = parse_metadata_csv(&fs::read_to_string(pred_csv)?, cfg.n_classes)?;
    let ref_events = parse_metadata_csv(&fs::read_to_string(ref_csv)?, cfg.n_classes)?;
    let n_frames = n_frames
        .unwrap_or_else(|| {
            pred_events
                .iter()
                .chain(&ref_events)
                .map(|e| e.offset_frame)
                .max()
                .unwrap_or(0)
        })
        .max(1);

    let pred = FrameEvents::from_instances(&pred_events, n_frames, cfg.n_classes);
    let reference = FrameEvents::from_instances(&ref_events, n_frames, cfg.n_classes);

    let mut notes = Vec::new();
    let seld = compute_seld_metrics(&pred, &reference, &SeldMetricsConfig::default())?;
    if seld.seld_score.is_none() {
        notes.push("seld components undefined: no references or no matched pairs".into());
    }
    let doa = match doa_metrics(&pred, &reference, seld_core::metrics::ANGULAR_THRESHOLD_DEG) {
        Ok(m) => Some(m),
        Err(MetricsError::NoReferences) => {
            notes.push("no reference events".into());
            None
        }
        Err(e) => return Err(e.into()),
    };

    let activity = |events: &FrameEvents| -> Vec<f64> {
        let mut act = vec![0.0; n_frames * cfg.n_classes];
        for t in 0..n_frames {
            for &(c, _) in events.frame(t) {
                act[t * cfg.n_classes + c] = 1.0;
            }
        }
        act
    };
    let f_macro = match segment_f_macro(
        &activity(&pred),
        &activity(&reference),
        n_frames,
        cfg.n_classes,
        1,
    ) {
        Ok(v) => Some(v),
        Err(MetricsError::NoReferences) => None,
        Err(e) => return Err(e.into()),
    };

    Ok(MetricsReport {
        seld: Some(seld),
        doa,
        f_macro,
        beamform: Vec::new(),
        notes,
    })
}

/// Per-track beamformer diagnostics from the simulator's clean/noise split.
fn beamform_diagnostics(
    scene: &SceneConfig,
    trajectories: &ClipLabels,
    cfg: &PipelineConfig,
) -> Result<Vec<TrackGain>> {
    let geom = scene.geometry();
    let render = RenderConfig {
        window_s: cfg.window_s,
        hop_s: cfg.hop_s,
        speed_of_sound: cfg.speed_of_sound,
    };
    let (clean, noise, _) = render_micarray_parts(scene, &geom, &render)?;
    if clean.n_samples() < (cfg.window_s * clean.sample_rate() as f64) as usize {
        return Ok(Vec::new());
    }
    // Without configured noise, probe suppression with a unit-power floor.
    let noise = noise.unwrap_or_else(|| {
        let mut probe = AudioClip::silent(clean.n_channels(), clean.n_samples(), clean.sample_rate());
        for m in 0..probe.n_channels() {
            *probe.channel_mut(m) = white_noise(
                clean.n_samples(),
                1.0,
                mix_seed(scene.seed, 0x7777 + m as u64),
            );
        }
        probe
    });

    let beam_cfg = BeamformConfig {
        speed_of_sound: cfg.speed_of_sound,
        label_hop_s: cfg.label_hop_s,
    };
    let clean_spec = stft(&clean, cfg.window_s, cfg.hop_s)?;
    let noise_spec = stft(&noise, cfg.window_s, cfg.hop_s)?;
    let clean_bf = ds_beamform(&clean_spec, trajectories, &geom, &beam_cfg)?;
    let noise_bf = ds_beamform(&noise_spec, trajectories, &geom, &beam_cfg)?;
    let field = SteeringField::build(trajectories, &geom, &clean_spec, &beam_cfg)?;

    let frame_power = |spec: &SpectralTensor, ch: usize, t: usize| -> f64 {
        spec.frame(ch, t).iter().map(|c| c.norm_sqr()).sum()
    };

    let mut gains = Vec::new();
    for k in 0..trajectories.n_tracks() {
        let active: Vec<usize> = (0..clean_spec.n_frames())
            .filter(|&t| field.weight(k, t) > ACTIVITY_THRESHOLD)
            .collect();
        if active.is_empty() {
            gains.push(TrackGain {
                track: k,
                signal_gain_db: None,
                noise_suppression_db: None,
            });
            continue;
        }
        let sum = |spec: &SpectralTensor, ch: usize| -> f64 {
            active.iter().map(|&t| frame_power(spec, ch, t)).sum()
        };
        let sig_in = sum(&clean_spec, 0);
        let sig_out = sum(&clean_bf[k], 0);
        let noise_in = sum(&noise_spec, 0);
        let noise_out = sum(&noise_bf[k], 0);
        gains.push(TrackGain {
            track: k,
            signal_gain_db: (sig_in > 0.0 && sig_out > 0.0)
                .then(|| 10.0 * (sig_out / sig_in).log10()),
            noise_suppression_db: (noise_in > 0.0 && noise_out > 0.0)
                .then(|| 10.0 * (noise_in / noise_out).log10()),
        });
    }
    Ok(gains)
}

/// Run the whole pipeline: simulate (or ingest), features, DoA estimation,
/// trackwise reordering, beamforming, and evaluation. Writes every artifact
/// into the output directory and returns the report.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let out_dir = cfg.out_dir.clone();
    fs::create_dir_all(&out_dir)?;
    let mut warnings = Vec::new();
    let mut artifacts = Vec::new();

    // Resolve inputs: simulate a scene or ingest existing files.
    let scene: Option<SceneConfig> = match &cfg.scene_path {
        Some(path) => {
            let mut scene = crate::config::load_scene(path)?;
            if let Some(seed) = cfg.seed {
                scene.seed = seed;
            }
            Some(scene)
        }
        None => None,
    };

    let (foa_wav, mic_wav, ref_csv) = match &scene {
        Some(scene) => {
            warnings.append(&mut stage_simulate(scene, cfg, &out_dir)?);
            for name in [artifact::FOA_WAV, artifact::MIC_WAV, artifact::REF_CSV] {
                artifacts.push(out_dir.join(name));
            }
            (
                out_dir.join(artifact::FOA_WAV),
                Some(out_dir.join(artifact::MIC_WAV)),
                out_dir.join(artifact::REF_CSV),
            )
        }
        None => {
            let foa = cfg
                .foa_wav
                .clone()
                .context("either a scene config or a FoA wav is required")?;
            let reference = cfg
                .metadata_csv
                .clone()
                .context("ingest mode needs reference metadata")?;
            (foa, cfg.mic_wav.clone(), reference)
        }
    };

    let features_path = out_dir.join(artifact::FEATURES);
    warnings.append(&mut stage_features(&foa_wav, cfg, &features_path)?);
    artifacts.push(features_path.clone());

    let predicted_path = out_dir.join(artifact::PREDICTED_CSV);
    let (_, mut w) = stage_predict(&features_path, Some(&ref_csv), cfg, &predicted_path)?;
    warnings.append(&mut w);
    artifacts.push(predicted_path.clone());

    let label_frames = scene
        .as_ref()
        .map(|s| (s.duration_s / cfg.label_hop_s).round().max(1.0) as usize);
    let tracks_path = out_dir.join(artifact::PREDICTED_TRACKS_CSV);
    let trajectories = stage_reorder(
        &predicted_path,
        &tracks_path,
        cfg.n_tracks,
        cfg.n_classes,
        label_frames,
    )?;
    artifacts.push(tracks_path.clone());

    match &mic_wav {
        Some(mic) => {
            let mut track_paths = stage_beamform(mic, &tracks_path, cfg, &out_dir)?;
            artifacts.append(&mut track_paths);
        }
        None => warnings.push("no microphone-array wav provided; beamforming skipped".into()),
    }

    let mut report = stage_evaluate(&predicted_path, &ref_csv, cfg, label_frames)?;
    if let Some(scene) = &scene {
        report.beamform = beamform_diagnostics(scene, &trajectories, cfg)?;
    } else {
        report
            .notes
            .push("beamform diagnostics need a simulated scene".into());
    }

    let metrics_txt = out_dir.join(artifact::METRICS_TXT);
    fs::write(&metrics_txt, report.to_key_value())?;
    artifacts.push(metrics_txt);
    let metrics_csv = out_dir.join(artifact::METRICS_CSV);
    fs::write(&metrics_csv, report.to_csv_row())?;
    artifacts.push(metrics_csv);

    let log_path = out_dir.join(artifact::WARNINGS_LOG);
    let mut log = String::new();
    for w in &warnings {
        log.push_str(&format!("warning: {w}\n"));
    }
    fs::write(&log_path, log)?;
    artifacts.push(log_path);

    Ok(PipelineOutcome {
        report,
        artifacts,
        warnings,
    })
}
