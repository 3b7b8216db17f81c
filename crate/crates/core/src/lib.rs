//! Core algorithms for sound event localization and detection (SELD).
//!
//! This crate holds the pure, allocation-only parts of the toolkit:
//!
//! - [`geometry`]: direction vectors, azimuth/elevation conversion, angular
//!   distance.
//! - [`spectral`]: spectral and feature tensors, the mel filterbank, log-mel
//!   and acoustic intensity-vector features.
//! - [`trackwise`]: the trackwise label model with stable track assignment,
//!   classwise collapse, and metadata CSV text handling.
//! - [`beamform`]: trajectory-driven delay-and-sum beamforming.
//! - [`doa`]: a classical intensity-vector direction-of-arrival estimator.
//! - [`assign`]: Hungarian assignment and permutation-invariant losses.
//! - [`metrics`]: the SELD evaluation suite (ER/F at 20 degrees, LE/LR,
//!   SELD score, DoA accuracy, segment F-macro).
//! - [`fusion`]: a toy-scale spatial-acoustic attention / gated fusion
//!   forward pass.
//!
//! The crate is `no_std`-compatible (with `alloc`); STFT analysis, audio and
//! file IO, the scene simulator, and the CLI live in the companion `seldkit`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assign;
pub mod beamform;
pub mod clip;
pub mod doa;
pub mod fusion;
pub mod geometry;
pub mod metrics;
pub mod spectral;
pub mod trackwise;

pub use clip::AudioClip;
pub use geometry::{AzEl, DirectionVector};
pub use spectral::{FeatureTensor, SpectralTensor};
pub use trackwise::{ClipLabels, EventInstance};
