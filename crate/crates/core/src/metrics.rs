//! SELD evaluation metrics.
//!
//! Detection matching is frame-level: per frame and class, predictions and
//! references pair up by minimum-total-angle Hungarian assignment. A matched
//! pair counts as a true positive for ER/F only when its angle is within the
//! threshold (20 degrees); all class-matched pairs, regardless of angle, feed
//! the localization error LE and localization recall LR.
//!
//! The error rate aggregates substitutions, deletions, and insertions over
//! 1 s segments (frame FN/FP pooled over classes within a segment); F is
//! macro-averaged per class. Undefined values (no references, no matches)
//! are reported as `None` rather than silently zero.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::assign::{hungarian, CostMatrix};
use crate::geometry::{angular_distance_deg, DirectionVector};
use crate::trackwise::{ClipLabels, EventInstance, ACTIVITY_THRESHOLD};

/// Angular threshold for location-dependent detection, degrees.
pub const ANGULAR_THRESHOLD_DEG: f64 = 20.0;

/// Label frames per evaluation segment (1 s at 0.1 s label hop).
pub const SEGMENT_FRAMES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    /// Frame counts or class counts differ between prediction and reference.
    ShapeMismatch,
    /// The reference carries no events, so the metric is undefined.
    NoReferences,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::ShapeMismatch => write!(f, "prediction/reference shape mismatch"),
            MetricsError::NoReferences => write!(f, "no reference events"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MetricsError {}

/// Per-frame sets of active (class, direction) events.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEvents {
    n_frames: usize,
    n_classes: usize,
    frames: Vec<Vec<(usize, DirectionVector)>>,
}

impl FrameEvents {
    pub fn new(n_frames: usize, n_classes: usize) -> Self {
        FrameEvents {
            n_frames,
            n_classes,
            frames: vec![Vec::new(); n_frames],
        }
    }

    pub fn push(&mut self, frame: usize, class_id: usize, dir: DirectionVector) {
        self.frames[frame].push((class_id, dir));
    }

    pub fn from_labels(labels: &ClipLabels) -> Self {
        FrameEvents {
            n_frames: labels.n_frames(),
            n_classes: labels.n_classes(),
            frames: labels.frame_events(ACTIVITY_THRESHOLD),
        }
    }

    pub fn from_instances(events: &[EventInstance], n_frames: usize, n_classes: usize) -> Self {
        let mut out = FrameEvents::new(n_frames, n_classes);
        for ev in events {
            for (i, dir) in ev.directions.iter().enumerate() {
                let frame = ev.onset_frame + i;
                if frame < n_frames {
                    out.frames[frame].push((ev.class_id, *dir));
                }
            }
        }
        out
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn frame(&self, index: usize) -> &[(usize, DirectionVector)] {
        &self.frames[index]
    }

    pub fn total_events(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }
}

/// One matched prediction/reference pair within a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMatch {
    pub class_id: usize,
    /// Index into the frame's prediction list.
    pub pred_index: usize,
    /// Index into the frame's reference list.
    pub ref_index: usize,
    pub angle_deg: f64,
}

/// Match one frame's predictions to references, per class, by
/// minimum-total-angle Hungarian assignment. Every returned pair is
/// class-matched; angle thresholds are applied by the caller.
pub fn match_events(
    pred: &[(usize, DirectionVector)],
    reference: &[(usize, DirectionVector)],
    n_classes: usize,
) -> Vec<FrameMatch> {
    let mut out = Vec::new();
    for class in 0..n_classes {
        let p_idx: Vec<usize> = pred
            .iter()
            .enumerate()
            .filter(|(_, (c, _))| *c == class)
            .map(|(i, _)| i)
            .collect();
        let r_idx: Vec<usize> = reference
            .iter()
            .enumerate()
            .filter(|(_, (c, _))| *c == class)
            .map(|(i, _)| i)
            .collect();
        if p_idx.is_empty() || r_idx.is_empty() {
            continue;
        }
        let angle = |pi: usize, ri: usize| -> f64 {
            angular_distance_deg(pred[p_idx[pi]].1, reference[r_idx[ri]].1).unwrap_or(180.0)
        };
        // Orient so rows <= cols; assignment then matches every row.
        let pred_rows = p_idx.len() <= r_idx.len();
        let (rows, cols) = if pred_rows {
            (p_idx.len(), r_idx.len())
        } else {
            (r_idx.len(), p_idx.len())
        };
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(if pred_rows { angle(i, j) } else { angle(j, i) });
            }
        }
        let assignment = hungarian(&CostMatrix::new(rows, cols, data).expect("finite angles"))
            .expect("valid cost matrix");
        for (i, col) in assignment.row_to_col.iter().enumerate() {
            let j = col.expect("rows <= cols leaves no row unassigned");
            let (pi, ri) = if pred_rows { (i, j) } else { (j, i) };
            out.push(FrameMatch {
                class_id: class,
                pred_index: p_idx[pi],
                ref_index: r_idx[ri],
                angle_deg: angle(pi, ri),
            });
        }
    }
    out
}

/// Location-dependent SELD detection metrics. `None` fields are undefined
/// for the given inputs (no references or no matched pairs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeldMetrics {
    /// Segment error rate at the angular threshold.
    pub er20: Option<f64>,
    /// Location-dependent F-score, percent, macro over classes.
    pub f20_pct: Option<f64>,
    /// Class-dependent localization error, degrees.
    pub le_cd_deg: Option<f64>,
    /// Class-dependent localization recall, percent.
    pub lr_cd_pct: Option<f64>,
    /// Combined SELD score; defined when all four components are.
    pub seld_score: Option<f64>,
}

/// Evaluation settings for [`compute_seld_metrics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeldMetricsConfig {
    pub angular_threshold_deg: f64,
    pub segment_frames: usize,
}

impl Default for SeldMetricsConfig {
    fn default() -> Self {
        SeldMetricsConfig {
            angular_threshold_deg: ANGULAR_THRESHOLD_DEG,
            segment_frames: SEGMENT_FRAMES,
        }
    }
}

/// Compute ER/F at the angular threshold plus class-dependent LE/LR and the
/// combined SELD score.
pub fn compute_seld_metrics(
    pred: &FrameEvents,
    reference: &FrameEvents,
    cfg: &SeldMetricsConfig,
) -> Result<SeldMetrics, MetricsError> {
    if pred.n_frames() != reference.n_frames()
        || pred.n_classes() != reference.n_classes()
        || cfg.segment_frames == 0
    {
        return Err(MetricsError::ShapeMismatch);
    }
    let n_classes = pred.n_classes();
    let n_frames = pred.n_frames();
    let n_segments = n_frames.div_ceil(cfg.segment_frames);

    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fneg = vec![0usize; n_classes];
    let mut seg_fn = vec![0usize; n_segments];
    let mut seg_fp = vec![0usize; n_segments];
    let mut matched_total = 0usize;
    let mut angle_sum = 0.0;
    let mut ref_total = 0usize;
    let mut pred_total = 0usize;

    for t in 0..n_frames {
        let seg = t / cfg.segment_frames;
        let p = pred.frame(t);
        let r = reference.frame(t);
        ref_total += r.len();
        pred_total += p.len();
        let matches = match_events(p, r, n_classes);
        for class in 0..n_classes {
            let p_count = p.iter().filter(|(c, _)| *c == class).count();
            let r_count = r.iter().filter(|(c, _)| *c == class).count();
            let class_matches: Vec<&FrameMatch> =
                matches.iter().filter(|m| m.class_id == class).collect();
            let m_count = class_matches.len();
            let within = class_matches
                .iter()
                .filter(|m| m.angle_deg <= cfg.angular_threshold_deg)
                .count();
            let beyond = m_count - within;

            tp[class] += within;
            let frame_fn = (r_count - m_count) + beyond;
            let frame_fp = (p_count - m_count) + beyond;
            fneg[class] += frame_fn;
            fp[class] += frame_fp;
            seg_fn[seg] += frame_fn;
            seg_fp[seg] += frame_fp;

            matched_total += m_count;
            angle_sum += class_matches.iter().map(|m| m.angle_deg).sum::<f64>();
        }
    }

    let er20 = if ref_total > 0 {
        let mut numer = 0usize;
        for s in 0..n_segments {
            let subs = seg_fn[s].min(seg_fp[s]);
            let dels = seg_fn[s] - subs;
            let ins = seg_fp[s] - subs;
            numer += subs + dels + ins;
        }
        Some(numer as f64 / ref_total as f64)
    } else if pred_total == 0 {
        Some(0.0)
    } else {
        None
    };

    let mut f_sum = 0.0;
    let mut f_classes = 0usize;
    for class in 0..n_classes {
        let denom = 2 * tp[class] + fp[class] + fneg[class];
        if denom > 0 {
            f_sum += 2.0 * tp[class] as f64 / denom as f64;
            f_classes += 1;
        }
    }
    let f20_pct = (f_classes > 0).then(|| 100.0 * f_sum / f_classes as f64);

    let le_cd_deg = (matched_total > 0).then(|| angle_sum / matched_total as f64);
    let lr_cd_pct = (ref_total > 0).then(|| 100.0 * matched_total as f64 / ref_total as f64);

    let seld = match (er20, f20_pct, le_cd_deg, lr_cd_pct) {
        (Some(er), Some(f), Some(le), Some(lr)) => Some(seld_score(er, f, le, lr)),
        _ => None,
    };

    Ok(SeldMetrics {
        er20,
        f20_pct,
        le_cd_deg,
        lr_cd_pct,
        seld_score: seld,
    })
}

/// Combined SELD score: mean of ER, 1 - F, LE/180, and 1 - LR.
/// F and LR are percents; LE is degrees.
pub fn seld_score(er: f64, f_pct: f64, le_deg: f64, lr_pct: f64) -> f64 {
    (er + (1.0 - f_pct / 100.0) + le_deg / 180.0 + (1.0 - lr_pct / 100.0)) / 4.0
}

/// Class-agnostic DoA detection metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaMetrics {
    /// Percent of references matched within the threshold.
    pub acc_pct: f64,
    /// Percent of references left unmatched.
    pub mdr_pct: f64,
    /// Mean angular error over matched pairs, degrees.
    pub mae_deg: Option<f64>,
}

/// Frame-level class-agnostic matching: ACC, MDR, MAE.
pub fn doa_metrics(
    pred: &FrameEvents,
    reference: &FrameEvents,
    threshold_deg: f64,
) -> Result<DoaMetrics, MetricsError> {
    if pred.n_frames() != reference.n_frames() {
        return Err(MetricsError::ShapeMismatch);
    }
    let mut ref_total = 0usize;
    let mut matched = 0usize;
    let mut within = 0usize;
    let mut angle_sum = 0.0;
    for t in 0..pred.n_frames() {
        // Collapse classes: matching here is direction-only.
        let p: Vec<(usize, DirectionVector)> =
            pred.frame(t).iter().map(|&(_, d)| (0, d)).collect();
        let r: Vec<(usize, DirectionVector)> =
            reference.frame(t).iter().map(|&(_, d)| (0, d)).collect();
        ref_total += r.len();
        for m in match_events(&p, &r, 1) {
            matched += 1;
            angle_sum += m.angle_deg;
            if m.angle_deg <= threshold_deg {
                within += 1;
            }
        }
    }
    if ref_total == 0 {
        return Err(MetricsError::NoReferences);
    }
    Ok(DoaMetrics {
        acc_pct: 100.0 * within as f64 / ref_total as f64,
        mdr_pct: 100.0 * (ref_total - matched) as f64 / ref_total as f64,
        mae_deg: (matched > 0).then(|| angle_sum / matched as f64),
    })
}

/// Segment-level macro F1 on classwise activity (frames x classes,
/// row-major, binarized at 0.5). A segment is active for a class when any of
/// its frames is. Macro average over classes present in the reference.
pub fn segment_f_macro(
    pred_activity: &[f64],
    ref_activity: &[f64],
    n_frames: usize,
    n_classes: usize,
    segment_frames: usize,
) -> Result<f64, MetricsError> {
    if pred_activity.len() != n_frames * n_classes
        || ref_activity.len() != n_frames * n_classes
        || segment_frames == 0
    {
        return Err(MetricsError::ShapeMismatch);
    }
    let n_segments = n_frames.div_ceil(segment_frames);
    let seg_active = |act: &[f64], seg: usize, class: usize| -> bool {
        let t0 = seg * segment_frames;
        let t1 = (t0 + segment_frames).min(n_frames);
        (t0..t1).any(|t| act[t * n_classes + class] >= ACTIVITY_THRESHOLD)
    };

    let mut f_sum = 0.0;
    let mut present = 0usize;
    for class in 0..n_classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fneg = 0usize;
        let mut any_ref = false;
        for seg in 0..n_segments {
            let r = seg_active(ref_activity, seg, class);
            let p = seg_active(pred_activity, seg, class);
            any_ref |= r;
            match (p, r) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
        if any_ref {
            present += 1;
            f_sum += 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64;
        }
    }
    if present == 0 {
        return Err(MetricsError::NoReferences);
    }
    Ok(f_sum / present as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{azel_to_unit, AzEl};

    fn dir(az: f64, el: f64) -> DirectionVector {
        azel_to_unit(AzEl::new(az, el)).unwrap()
    }

    fn single_event(class: usize, frames: core::ops::Range<usize>, az: f64, n_frames: usize) -> FrameEvents {
        let mut fe = FrameEvents::new(n_frames, 3);
        for t in frames {
            fe.push(t, class, dir(az, 0.0));
        }
        fe
    }

    #[test]
    fn perfect_prediction() {
        let reference = single_event(0, 0..10, 30.0, 20);
        let m = compute_seld_metrics(&reference, &reference, &SeldMetricsConfig::default()).unwrap();
        assert_eq!(m.er20, Some(0.0));
        assert_eq!(m.f20_pct, Some(100.0));
        assert_eq!(m.le_cd_deg, Some(0.0));
        assert_eq!(m.lr_cd_pct, Some(100.0));
        assert_eq!(m.seld_score, Some(0.0));
    }

    #[test]
    fn ten_degree_offset_fixture() {
        let reference = single_event(0, 0..10, 0.0, 10);
        let pred = single_event(0, 0..10, 10.0, 10);
        let m = compute_seld_metrics(&pred, &reference, &SeldMetricsConfig::default()).unwrap();
        assert_eq!(m.er20, Some(0.0));
        assert_eq!(m.f20_pct, Some(100.0));
        let le = m.le_cd_deg.unwrap();
        assert!((le - 10.0).abs() < 1e-9, "LE = {le}");
        assert_eq!(m.lr_cd_pct, Some(100.0));
        let score = m.seld_score.unwrap();
        assert!((score - 10.0 / 180.0 / 4.0).abs() < 1e-12);
        assert!((score - 0.0139).abs() < 1e-4);
    }

    #[test]
    fn deletion_only_fixture() {
        let reference = single_event(1, 0..10, 45.0, 10);
        let pred = FrameEvents::new(10, 3);
        let m = compute_seld_metrics(&pred, &reference, &SeldMetricsConfig::default()).unwrap();
        assert_eq!(m.er20, Some(1.0));
        assert_eq!(m.f20_pct, Some(0.0));
        assert_eq!(m.le_cd_deg, None);
        assert_eq!(m.lr_cd_pct, Some(0.0));
        assert_eq!(m.seld_score, None);
    }

    #[test]
    fn thirty_degree_match_counts_for_le_and_lr_only() {
        let reference = single_event(0, 0..10, 0.0, 10);
        let pred = single_event(0, 0..10, 30.0, 10);
        let m = compute_seld_metrics(&pred, &reference, &SeldMetricsConfig::default()).unwrap();
        // Substitutions: every frame has one FN and one FP.
        assert_eq!(m.er20, Some(1.0));
        assert_eq!(m.f20_pct, Some(0.0));
        assert!((m.le_cd_deg.unwrap() - 30.0).abs() < 1e-9);
        assert_eq!(m.lr_cd_pct, Some(100.0));
    }

    #[test]
    fn empty_vs_empty_is_defined_er_only() {
        let empty = FrameEvents::new(10, 3);
        let m = compute_seld_metrics(&empty, &empty, &SeldMetricsConfig::default()).unwrap();
        assert_eq!(m.er20, Some(0.0));
        assert_eq!(m.f20_pct, None);
        assert_eq!(m.le_cd_deg, None);
        assert_eq!(m.lr_cd_pct, None);
        assert_eq!(m.seld_score, None);
    }

    #[test]
    fn seld_score_table_values() {
        // Published rows: inputs and printed scores agree within print rounding.
        let cases: [(f64, f64, f64, f64, f64); 7] = [
            (0.57, 29.9, 22.0, 47.7, 0.4791),
            (0.58, 39.5, 20.0, 55.8, 0.4345),
            (0.56, 42.7, 17.9, 62.0, 0.4019),
            (0.54, 42.5, 18.7, 62.6, 0.3980),
            (0.55, 42.8, 18.3, 62.1, 0.4007),
            (0.54, 42.9, 17.9, 62.4, 0.3966),
            (0.54, 44.0, 18.4, 64.5, 0.3891),
        ];
        for (er, f, le, lr, printed) in cases {
            let score = seld_score(er, f, le, lr);
            assert!(
                (score - printed).abs() <= 0.002,
                "({er}, {f}, {le}, {lr}): {score} vs {printed}"
            );
        }
        // First row is exact to print precision.
        assert!((seld_score(0.57, 29.9, 22.0, 47.7) - 0.4791).abs() < 5e-5);
        assert_eq!(seld_score(0.0, 100.0, 0.0, 100.0), 0.0);
    }

    #[test]
    fn doa_metrics_perfect() {
        let reference = single_event(0, 0..10, 25.0, 10);
        let m = doa_metrics(&reference, &reference, ANGULAR_THRESHOLD_DEG).unwrap();
        assert_eq!(m.acc_pct, 100.0);
        assert_eq!(m.mdr_pct, 0.0);
        assert_eq!(m.mae_deg, Some(0.0));
    }

    #[test]
    fn doa_metrics_half_missed() {
        let reference = single_event(0, 0..10, 0.0, 10);
        let pred = single_event(0, 0..5, 5.0, 10);
        let m = doa_metrics(&pred, &reference, ANGULAR_THRESHOLD_DEG).unwrap();
        assert_eq!(m.acc_pct, 50.0);
        assert_eq!(m.mdr_pct, 50.0);
        assert!((m.mae_deg.unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn doa_metrics_no_references_is_error() {
        let pred = single_event(0, 0..5, 5.0, 10);
        let reference = FrameEvents::new(10, 3);
        assert_eq!(
            doa_metrics(&pred, &reference, ANGULAR_THRESHOLD_DEG).unwrap_err(),
            MetricsError::NoReferences
        );
    }

    #[test]
    fn doa_metrics_ignore_class_labels() {
        let mut reference = FrameEvents::new(5, 3);
        let mut pred = FrameEvents::new(5, 3);
        for t in 0..5 {
            reference.push(t, 1, dir(40.0, 0.0));
            pred.push(t, 2, dir(40.0, 0.0));
        }
        let m = doa_metrics(&pred, &reference, ANGULAR_THRESHOLD_DEG).unwrap();
        assert_eq!(m.acc_pct, 100.0);
    }

    fn activity(rows: &[(usize, usize)], n_frames: usize, n_classes: usize) -> Vec<f64> {
        let mut a = vec![0.0; n_frames * n_classes];
        for &(t, c) in rows {
            a[t * n_classes + c] = 1.0;
        }
        a
    }

    #[test]
    fn segment_f_perfect_and_half() {
        let n_frames = 10;
        let reference = activity(&[(0, 0), (1, 0), (5, 1)], n_frames, 2);
        assert_eq!(
            segment_f_macro(&reference, &reference, n_frames, 2, 1).unwrap(),
            1.0
        );
        // Class 1 entirely missed.
        let pred = activity(&[(0, 0), (1, 0)], n_frames, 2);
        assert_eq!(
            segment_f_macro(&pred, &reference, n_frames, 2, 1).unwrap(),
            0.5
        );
    }

    #[test]
    fn segment_f_empty_reference_errors() {
        let zeros = vec![0.0; 20];
        assert_eq!(
            segment_f_macro(&zeros, &zeros, 10, 2, 1).unwrap_err(),
            MetricsError::NoReferences
        );
    }

    fn rotate_z(fe: &FrameEvents, phi_deg: f64) -> FrameEvents {
        let phi = phi_deg.to_radians();
        let mut out = FrameEvents::new(fe.n_frames(), fe.n_classes());
        for t in 0..fe.n_frames() {
            for &(c, d) in fe.frame(t) {
                out.push(
                    t,
                    c,
                    DirectionVector::new(
                        d.x * phi.cos() - d.y * phi.sin(),
                        d.x * phi.sin() + d.y * phi.cos(),
                        d.z,
                    ),
                );
            }
        }
        out
    }

    #[test]
    fn metrics_invariant_under_global_rotation() {
        let mut reference = FrameEvents::new(12, 3);
        let mut pred = FrameEvents::new(12, 3);
        for t in 0..12 {
            reference.push(t, t % 3, dir(10.0 * t as f64 - 50.0, 5.0));
            if t % 2 == 0 {
                pred.push(t, t % 3, dir(10.0 * t as f64 - 43.0, 2.0));
            }
        }
        let base = compute_seld_metrics(&pred, &reference, &SeldMetricsConfig::default()).unwrap();
        let rot = compute_seld_metrics(
            &rotate_z(&pred, 73.0),
            &rotate_z(&reference, 73.0),
            &SeldMetricsConfig::default(),
        )
        .unwrap();
        assert_eq!(base.er20, rot.er20);
        assert_eq!(base.f20_pct, rot.f20_pct);
        assert_eq!(base.lr_cd_pct, rot.lr_cd_pct);
        let (a, b) = (base.le_cd_deg.unwrap(), rot.le_cd_deg.unwrap());
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn adding_a_true_positive_never_decreases_f_or_lr() {
        let mut reference = FrameEvents::new(10, 2);
        let mut pred = FrameEvents::new(10, 2);
        reference.push(0, 0, dir(0.0, 0.0));
        reference.push(1, 1, dir(90.0, 0.0));
        pred.push(0, 0, dir(50.0, 0.0)); // matched beyond threshold
        let before = compute_seld_metrics(&pred, &reference, &SeldMetricsConfig::default()).unwrap();
        // Add a perfectly localized prediction for the unmatched reference.
        pred.push(1, 1, dir(90.0, 0.0));
        let after = compute_seld_metrics(&pred, &reference, &SeldMetricsConfig::default()).unwrap();
        assert!(after.f20_pct.unwrap() >= before.f20_pct.unwrap());
        assert!(after.lr_cd_pct.unwrap() >= before.lr_cd_pct.unwrap());
    }
}
