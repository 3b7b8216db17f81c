//! Classical intensity-vector direction-of-arrival estimation.
//!
//! A non-neural single-source estimator: per label frame, the energy-weighted
//! mean of per-band intensity vectors over bands whose energy clears an
//! activity threshold relative to the clip peak.

use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::DirectionVector;
use crate::spectral::FeatureTensor;
use crate::trackwise::ClipLabels;

/// Default band activity threshold relative to the clip peak, in dB.
pub const DEFAULT_ACTIVITY_THRESHOLD_DB: f64 = -40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoaError {
    /// Intensity-vector and log-mel tensors are not aligned.
    ShapeMismatch,
}

impl fmt::Display for DoaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DoaError::ShapeMismatch => write!(f, "feature tensor shapes do not match"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DoaError {}

/// Estimator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaConfig {
    /// Band energy threshold relative to the clip peak, dB.
    pub activity_threshold_db: f64,
    /// Feature frames per label frame (0.02 s hop -> 0.1 s labels gives 5).
    pub frames_per_label: usize,
}

impl Default for DoaConfig {
    fn default() -> Self {
        DoaConfig {
            activity_threshold_db: DEFAULT_ACTIVITY_THRESHOLD_DB,
            frames_per_label: 5,
        }
    }
}

/// Estimate a single-track DoA stream from intensity-vector and log-mel
/// features.
///
/// Band energy is recovered from channel 0 of the log-mel tensor. A label
/// frame with no band above threshold, or whose intensity vectors cancel,
/// is inactive.
pub fn estimate_doa_iv(
    ivs: &FeatureTensor,
    logmels: &FeatureTensor,
    cfg: &DoaConfig,
) -> Result<ClipLabels, DoaError> {
    if ivs.n_channels() != 3
        || logmels.n_channels() == 0
        || ivs.n_frames() != logmels.n_frames()
        || ivs.n_bands() != logmels.n_bands()
        || cfg.frames_per_label == 0
    {
        return Err(DoaError::ShapeMismatch);
    }
    let n_frames = ivs.n_frames();
    let n_bands = ivs.n_bands();
    let n_labels = n_frames.div_ceil(cfg.frames_per_label);

    let mut peak = f64::NEG_INFINITY;
    for t in 0..n_frames {
        for b in 0..n_bands {
            peak = peak.max(logmels.value(0, t, b));
        }
    }
    // Threshold in log-energy terms: peak + thr_db * ln(10)/10.
    let log_threshold = peak + cfg.activity_threshold_db * core::f64::consts::LN_10 / 10.0;

    let mut labels = ClipLabels::empty(1, n_labels, 1);
    for label in 0..n_labels {
        let t0 = label * cfg.frames_per_label;
        let t1 = (t0 + cfg.frames_per_label).min(n_frames);
        let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
        let mut any = false;
        for t in t0..t1 {
            for b in 0..n_bands {
                let log_e = logmels.value(0, t, b);
                if log_e >= log_threshold {
                    let e = log_e.exp();
                    sx += e * ivs.value(0, t, b);
                    sy += e * ivs.value(1, t, b);
                    sz += e * ivs.value(2, t, b);
                    any = true;
                }
            }
        }
        if any {
            let mean = DirectionVector::new(sx, sy, sz);
            if mean.norm() > 1e-12 {
                labels.set_active_frame(0, label, 0, mean.normalized());
            }
        }
    }
    Ok(labels)
}
