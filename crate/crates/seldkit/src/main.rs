use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use seldkit::config::{
    load_scene, PipelineConfig, PipelineOverlay, DEFAULT_ACTIVITY_THRESHOLD_DB, DEFAULT_HOP_S,
    DEFAULT_LABEL_HOP_S, DEFAULT_N_MELS, DEFAULT_WINDOW_S,
};
use seldkit::pipeline::{
    run_pipeline, stage_beamform, stage_evaluate, stage_features, stage_predict, stage_reorder,
    stage_simulate,
};

#[derive(Parser)]
#[command(
    name = "seldkit",
    version,
    about = "Spatial audio SELD toolkit: simulate scenes, extract features, beamform, and evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Signal-processing knobs shared across subcommands.
#[derive(Args, Debug)]
struct DspArgs {
    /// STFT window length, seconds
    #[arg(long, default_value_t = DEFAULT_WINDOW_S)]
    window_s: f64,
    /// STFT hop length, seconds
    #[arg(long, default_value_t = DEFAULT_HOP_S)]
    hop_s: f64,
    /// Mel band count
    #[arg(long, default_value_t = DEFAULT_N_MELS)]
    mels: usize,
    /// Label frame hop, seconds
    #[arg(long, default_value_t = DEFAULT_LABEL_HOP_S)]
    label_hop_s: f64,
    /// Maximum simultaneous tracks
    #[arg(long, default_value_t = seld_core::trackwise::DEFAULT_TRACKS)]
    tracks: usize,
    /// Event class count
    #[arg(long, default_value_t = seld_core::trackwise::DEFAULT_CLASSES)]
    classes: usize,
    /// Speed of sound, m/s
    #[arg(long, default_value_t = seld_core::beamform::SPEED_OF_SOUND)]
    speed_of_sound: f64,
    /// Tetrahedral array radius, meters
    #[arg(long, default_value_t = seldkit::scene::DEFAULT_ARRAY_RADIUS_M)]
    array_radius_m: f64,
    /// DoA band activity threshold relative to the clip peak, dB
    #[arg(long, default_value_t = DEFAULT_ACTIVITY_THRESHOLD_DB)]
    threshold_db: f64,
}

impl DspArgs {
    fn to_config(&self, out_dir: PathBuf) -> PipelineConfig {
        let mut cfg = PipelineConfig::with_out_dir(out_dir);
        cfg.window_s = self.window_s;
        cfg.hop_s = self.hop_s;
        cfg.n_mels = self.mels;
        cfg.label_hop_s = self.label_hop_s;
        cfg.n_tracks = self.tracks;
        cfg.n_classes = self.classes;
        cfg.speed_of_sound = self.speed_of_sound;
        cfg.array_radius_m = self.array_radius_m;
        cfg.activity_threshold_db = self.threshold_db;
        cfg
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene config to FoA and mic-array wavs plus reference metadata
    Simulate {
        /// Scene config JSON
        #[arg(long)]
        scene: PathBuf,
        /// Output directory
        #[arg(long, env = "SELDKIT_OUT_DIR")]
        out_dir: PathBuf,
        /// Override the scene's seed
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        dsp: DspArgs,
    },
    /// Extract the combined log-mel + intensity-vector feature tensor
    Features {
        /// Input 4-channel FoA wav
        #[arg(long)]
        foa: PathBuf,
        /// Output tensor file
        #[arg(long)]
        out: PathBuf,
        /// Also run the DoA estimator and write predicted metadata here
        #[arg(long)]
        predict: Option<PathBuf>,
        /// Reference metadata supplying event classes for --predict
        #[arg(long)]
        metadata: Option<PathBuf>,
        #[command(flatten)]
        dsp: DspArgs,
    },
    /// Delay-and-sum beamform a mic-array wav along trackwise trajectories
    Beamform {
        /// Input M-channel microphone-array wav
        #[arg(long)]
        mic: PathBuf,
        /// Metadata CSV carrying the trajectories
        #[arg(long)]
        metadata: PathBuf,
        /// Output directory for per-track wavs
        #[arg(long, env = "SELDKIT_OUT_DIR")]
        out_dir: PathBuf,
        #[command(flatten)]
        dsp: DspArgs,
    },
    /// Reorder metadata into stable tracks (source column becomes the track)
    Reorder {
        /// Input metadata CSV
        #[arg(long)]
        metadata: PathBuf,
        /// Output trackwise CSV
        #[arg(long)]
        out: PathBuf,
        /// Label frame count (defaults to the last event offset)
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        dsp: DspArgs,
    },
    /// Score predicted metadata against a reference
    Evaluate {
        /// Predicted metadata CSV
        #[arg(long)]
        pred: PathBuf,
        /// Reference metadata CSV
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Label frame count (defaults to the last event offset)
        #[arg(long)]
        frames: Option<usize>,
        /// Also write the key-value report to this file
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        dsp: DspArgs,
    },
    /// Run the whole pipeline: simulate/ingest, features, estimate, reorder,
    /// beamform, evaluate
    Pipeline {
        /// Scene config JSON (simulate mode)
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Existing FoA wav (ingest mode)
        #[arg(long)]
        foa: Option<PathBuf>,
        /// Existing microphone-array wav (ingest mode, optional)
        #[arg(long)]
        mic: Option<PathBuf>,
        /// Reference metadata CSV (ingest mode)
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Output directory
        #[arg(long, env = "SELDKIT_OUT_DIR")]
        out_dir: PathBuf,
        /// Override the scene's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Pipeline config JSON; fields present in the file take precedence
        /// over flags
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        dsp: DspArgs,
    },
}

fn emit_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            scene,
            out_dir,
            seed,
            dsp,
        } => {
            let cfg = dsp.to_config(out_dir.clone());
            let mut scene = load_scene(&scene)?;
            if let Some(seed) = seed {
                scene.seed = seed;
            }
            let warnings = stage_simulate(&scene, &cfg, &out_dir)?;
            emit_warnings(&warnings);
            println!(
                "wrote foa.wav, mic.wav, ref_metadata.csv to {}",
                out_dir.display()
            );
        }
        Command::Features {
            foa,
            out,
            predict,
            metadata,
            dsp,
        } => {
            let parent = out
                .parent()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            let cfg = dsp.to_config(parent);
            let warnings = stage_features(&foa, &cfg, &out)?;
            emit_warnings(&warnings);
            println!("wrote {}", out.display());
            if let Some(predicted) = predict {
                let (_, warnings) = stage_predict(&out, metadata.as_deref(), &cfg, &predicted)?;
                emit_warnings(&warnings);
                println!("wrote {}", predicted.display());
            }
        }
        Command::Beamform {
            mic,
            metadata,
            out_dir,
            dsp,
        } => {
            let cfg = dsp.to_config(out_dir.clone());
            let paths = stage_beamform(&mic, &metadata, &cfg, &out_dir)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Reorder {
            metadata,
            out,
            frames,
            dsp,
        } => {
            let cfg = dsp.to_config(PathBuf::from("."));
            stage_reorder(&metadata, &out, cfg.n_tracks, cfg.n_classes, frames)?;
            println!("wrote {}", out.display());
        }
        Command::Evaluate {
            pred,
            reference,
            frames,
            out,
            dsp,
        } => {
            let cfg = dsp.to_config(PathBuf::from("."));
            let report = stage_evaluate(&pred, &reference, &cfg, frames)?;
            let text = report.to_key_value();
            print!("{text}");
            if let Some(out) = out {
                std::fs::write(&out, &text)
                    .with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Pipeline {
            scene,
            foa,
            mic,
            metadata,
            out_dir,
            seed,
            config,
            dsp,
        } => {
            let mut cfg = dsp.to_config(out_dir);
            cfg.scene_path = scene;
            cfg.foa_wav = foa;
            cfg.mic_wav = mic;
            cfg.metadata_csv = metadata;
            cfg.seed = seed;
            if let Some(path) = config {
                PipelineOverlay::load(&path)?.apply(&mut cfg);
            }
            let outcome = run_pipeline(&cfg)?;
            emit_warnings(&outcome.warnings);
            print!("{}", outcome.report.to_key_value());
            eprintln!("artifacts in {}", cfg.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
