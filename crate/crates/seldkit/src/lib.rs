//! Spatial audio SELD toolkit: the IO/std companion to `seld-core`.
//!
//! Provides STFT analysis/synthesis, WAV and tensor file formats, a synthetic
//! FoA + microphone-array scene simulator, and the end-to-end pipeline the
//! `seldkit` binary drives.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod scene;
pub mod stft;
pub mod tensor;
pub mod wav;
