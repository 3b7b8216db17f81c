//! Trackwise label model: stable track assignment, classwise collapse, and
//! metadata CSV text handling.
//!
//! Labels for one clip hold up to `K` parallel tracks over `T'` label frames.
//! Track assignment is first-fit and permanent: once an event claims a track,
//! the track is bound to that event for the whole clip, so a track never
//! changes event type mid-clip and a freed track is never reused.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{azel_to_unit, unit_to_azel, AzEl, DirectionVector};

/// Default number of tracks.
pub const DEFAULT_TRACKS: usize = 6;

/// Default number of event classes.
pub const DEFAULT_CLASSES: usize = 13;

/// Activity threshold used when binarizing probabilities.
pub const ACTIVITY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum TrackwiseError {
    /// More events than tracks in one clip; identifies the unplaceable event.
    TrackOverflow { class_id: usize, onset_frame: usize },
    /// Event frames fall outside the clip, or onset >= offset.
    InvalidEvent { class_id: usize, onset_frame: usize },
    /// Malformed CSV row.
    Parse { line: usize, message: String },
    /// Class id outside [0, n_classes).
    ClassOutOfRange { line: usize, class_id: usize },
    /// Indices or shapes out of bounds.
    ShapeMismatch,
}

impl fmt::Display for TrackwiseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackwiseError::TrackOverflow {
                class_id,
                onset_frame,
            } => write!(
                f,
                "no free track for event (class {class_id}, onset frame {onset_frame})"
            ),
            TrackwiseError::InvalidEvent {
                class_id,
                onset_frame,
            } => write!(
                f,
                "event (class {class_id}, onset frame {onset_frame}) does not fit in clip"
            ),
            TrackwiseError::Parse { line, message } => {
                write!(f, "metadata line {line}: {message}")
            }
            TrackwiseError::ClassOutOfRange { line, class_id } => {
                write!(f, "metadata line {line}: class {class_id} out of range")
            }
            TrackwiseError::ShapeMismatch => write!(f, "label shape mismatch"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TrackwiseError {}

/// One event occurrence: a class active over a contiguous frame span with a
/// direction per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EventInstance {
    pub class_id: usize,
    pub onset_frame: usize,
    pub offset_frame: usize,
    pub directions: Vec<DirectionVector>,
}

impl EventInstance {
    pub fn new(
        class_id: usize,
        onset_frame: usize,
        offset_frame: usize,
        directions: Vec<DirectionVector>,
    ) -> Self {
        debug_assert_eq!(directions.len(), offset_frame - onset_frame);
        EventInstance {
            class_id,
            onset_frame,
            offset_frame,
            directions,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.offset_frame - self.onset_frame
    }

    /// Content-based total order: (onset, class, offset, direction bits).
    /// Events identical in content compare equal, which keeps track
    /// assignment invariant under input permutation.
    fn sort_key(&self) -> (usize, usize, usize, Vec<(u64, u64, u64)>) {
        (
            self.onset_frame,
            self.class_id,
            self.offset_frame,
            self.directions
                .iter()
                .map(|d| (d.x.to_bits(), d.y.to_bits(), d.z.to_bits()))
                .collect(),
        )
    }
}

/// Trackwise labels for one clip: per (track, frame) activity, direction,
/// and per-class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipLabels {
    n_tracks: usize,
    n_frames: usize,
    n_classes: usize,
    activity: Vec<f64>,
    directions: Vec<DirectionVector>,
    sed: Vec<f64>,
}

impl ClipLabels {
    pub fn empty(n_tracks: usize, n_frames: usize, n_classes: usize) -> Self {
        ClipLabels {
            n_tracks,
            n_frames,
            n_classes,
            activity: vec![0.0; n_tracks * n_frames],
            directions: vec![DirectionVector::ZERO; n_tracks * n_frames],
            sed: vec![0.0; n_tracks * n_frames * n_classes],
        }
    }

    pub fn n_tracks(&self) -> usize {
        self.n_tracks
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    fn ti(&self, track: usize, frame: usize) -> usize {
        track * self.n_frames + frame
    }

    pub fn activity(&self, track: usize, frame: usize) -> f64 {
        self.activity[self.ti(track, frame)]
    }

    pub fn direction(&self, track: usize, frame: usize) -> DirectionVector {
        self.directions[self.ti(track, frame)]
    }

    pub fn sed(&self, track: usize, frame: usize, class: usize) -> f64 {
        self.sed[self.ti(track, frame) * self.n_classes + class]
    }

    pub fn set_activity(&mut self, track: usize, frame: usize, value: f64) {
        let i = self.ti(track, frame);
        self.activity[i] = value;
    }

    pub fn set_direction(&mut self, track: usize, frame: usize, dir: DirectionVector) {
        let i = self.ti(track, frame);
        self.directions[i] = dir;
    }

    pub fn set_sed(&mut self, track: usize, frame: usize, class: usize, value: f64) {
        let i = self.ti(track, frame) * self.n_classes + class;
        self.sed[i] = value;
    }

    /// Mark (track, frame) active with a one-hot class and direction.
    pub fn set_active_frame(
        &mut self,
        track: usize,
        frame: usize,
        class: usize,
        dir: DirectionVector,
    ) {
        self.set_activity(track, frame, 1.0);
        self.set_direction(track, frame, dir);
        self.set_sed(track, frame, class, 1.0);
    }

    /// Direction stream of one track, `n_frames` long.
    pub fn track_directions(&self, track: usize) -> &[DirectionVector] {
        &self.directions[track * self.n_frames..(track + 1) * self.n_frames]
    }

    /// SED probabilities of one track, row-major frames x classes.
    pub fn track_sed(&self, track: usize) -> &[f64] {
        let stride = self.n_frames * self.n_classes;
        &self.sed[track * stride..(track + 1) * stride]
    }

    /// The set of classes with nonzero SED mass on a track.
    pub fn track_classes(&self, track: usize) -> Vec<usize> {
        let mut present = vec![false; self.n_classes];
        for t in 0..self.n_frames {
            for c in 0..self.n_classes {
                if self.sed(track, t, c) > 0.0 {
                    present[c] = true;
                }
            }
        }
        (0..self.n_classes).filter(|&c| present[c]).collect()
    }

    /// Active (class, direction) pairs per frame, binarized at `threshold`.
    /// Class is the argmax of the frame's SED row.
    pub fn frame_events(&self, threshold: f64) -> Vec<Vec<(usize, DirectionVector)>> {
        let mut frames = vec![Vec::new(); self.n_frames];
        for k in 0..self.n_tracks {
            for t in 0..self.n_frames {
                if self.activity(k, t) >= threshold {
                    let mut best = 0;
                    for c in 1..self.n_classes {
                        if self.sed(k, t, c) > self.sed(k, t, best) {
                            best = c;
                        }
                    }
                    frames[t].push((best, self.direction(k, t)));
                }
            }
        }
        frames
    }

    /// Rebuild event instances from contiguous active runs per track.
    pub fn extract_instances(&self, threshold: f64) -> Vec<EventInstance> {
        let mut out = Vec::new();
        for k in 0..self.n_tracks {
            let mut t = 0;
            while t < self.n_frames {
                if self.activity(k, t) >= threshold {
                    let onset = t;
                    let mut dirs = Vec::new();
                    while t < self.n_frames && self.activity(k, t) >= threshold {
                        dirs.push(self.direction(k, t));
                        t += 1;
                    }
                    let mut class = 0;
                    for c in 1..self.n_classes {
                        if self.sed(k, onset, c) > self.sed(k, onset, class) {
                            class = c;
                        }
                    }
                    out.push(EventInstance::new(class, onset, t, dirs));
                } else {
                    t += 1;
                }
            }
        }
        out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        out
    }
}

/// Assign events to tracks with the stable first-fit rule.
///
/// Events are processed in (onset, class, offset, direction) order; each
/// claims the lowest-index track never used before in this clip and keeps it
/// for the whole clip. Errors when more events arrive than tracks exist,
/// identifying the unplaceable event.
pub fn reorder_events(
    events: &[EventInstance],
    n_tracks: usize,
    n_frames: usize,
    n_classes: usize,
) -> Result<ClipLabels, TrackwiseError> {
    for ev in events {
        if ev.onset_frame >= ev.offset_frame
            || ev.offset_frame > n_frames
            || ev.class_id >= n_classes
            || ev.directions.len() != ev.n_frames()
        {
            return Err(TrackwiseError::InvalidEvent {
                class_id: ev.class_id,
                onset_frame: ev.onset_frame,
            });
        }
    }
    let mut order: Vec<&EventInstance> = events.iter().collect();
    order.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut labels = ClipLabels::empty(n_tracks, n_frames, n_classes);
    for (slot, ev) in order.iter().enumerate() {
        if slot >= n_tracks {
            return Err(TrackwiseError::TrackOverflow {
                class_id: ev.class_id,
                onset_frame: ev.onset_frame,
            });
        }
        for (i, dir) in ev.directions.iter().enumerate() {
            labels.set_active_frame(slot, ev.onset_frame + i, ev.class_id, *dir);
        }
    }
    Ok(labels)
}

/// Collapse trackwise SED to classwise activity by taking the per-class
/// maximum across tracks. Returns frames x classes, row-major.
pub fn collapse_tracks(labels: &ClipLabels) -> Vec<f64> {
    let mut out = vec![0.0f64; labels.n_frames() * labels.n_classes()];
    for k in 0..labels.n_tracks() {
        for t in 0..labels.n_frames() {
            for c in 0..labels.n_classes() {
                let i = t * labels.n_classes() + c;
                out[i] = out[i].max(labels.sed(k, t, c));
            }
        }
    }
    out
}

/// Parse DCASE-style metadata CSV: `frame,class,source,azimuth,elevation`
/// rows at the label frame hop, no header. Rows are grouped into event
/// instances by (class, source) over contiguous frames.
pub fn parse_metadata_csv(
    text: &str,
    n_classes: usize,
) -> Result<Vec<EventInstance>, TrackwiseError> {
    // (class, source) -> rows (frame, direction)
    let mut groups: Vec<((usize, usize), Vec<(usize, DirectionVector)>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(TrackwiseError::Parse {
                line: line_no,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let frame: usize = fields[0].parse().map_err(|_| TrackwiseError::Parse {
            line: line_no,
            message: format!("bad frame index '{}'", fields[0]),
        })?;
        let class_id: usize = fields[1].parse().map_err(|_| TrackwiseError::Parse {
            line: line_no,
            message: format!("bad class id '{}'", fields[1]),
        })?;
        if class_id >= n_classes {
            return Err(TrackwiseError::ClassOutOfRange {
                line: line_no,
                class_id,
            });
        }
        let source: usize = fields[2].parse().map_err(|_| TrackwiseError::Parse {
            line: line_no,
            message: format!("bad source id '{}'", fields[2]),
        })?;
        let az: f64 = fields[3].parse().map_err(|_| TrackwiseError::Parse {
            line: line_no,
            message: format!("bad azimuth '{}'", fields[3]),
        })?;
        let el: f64 = fields[4].parse().map_err(|_| TrackwiseError::Parse {
            line: line_no,
            message: format!("bad elevation '{}'", fields[4]),
        })?;
        let dir = azel_to_unit(AzEl::new(az, el)).map_err(|e| TrackwiseError::Parse {
            line: line_no,
            message: format!("{e}"),
        })?;

        let key = (class_id, source);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push((frame, dir)),
            None => groups.push((key, vec![(frame, dir)])),
        }
    }

    let mut events = Vec::new();
    for ((class_id, _source), mut rows) in groups {
        rows.sort_by_key(|&(frame, _)| frame);
        let mut run: Vec<(usize, DirectionVector)> = Vec::new();
        for (frame, dir) in rows {
            if let Some(&(last, _)) = run.last() {
                if frame == last {
                    // Duplicate (class, source, frame) rows collapse to one.
                    continue;
                }
                if frame != last + 1 {
                    events.push(instance_from_run(class_id, &run));
                    run.clear();
                }
            }
            run.push((frame, dir));
        }
        if !run.is_empty() {
            events.push(instance_from_run(class_id, &run));
        }
    }
    events.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(events)
}

fn instance_from_run(class_id: usize, run: &[(usize, DirectionVector)]) -> EventInstance {
    let onset = run[0].0;
    let offset = run[run.len() - 1].0 + 1;
    EventInstance::new(class_id, onset, offset, run.iter().map(|&(_, d)| d).collect())
}

/// Serialize event instances to metadata CSV, the inverse of
/// [`parse_metadata_csv`]. Each instance gets a source id unique within its
/// class; rows are ordered by (frame, class, source).
pub fn serialize_metadata_csv(events: &[EventInstance]) -> String {
    let mut order: Vec<&EventInstance> = events.iter().collect();
    order.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    // source id = instance index within its class, in sorted order
    let mut rows: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
    let mut class_counts: Vec<(usize, usize)> = Vec::new();
    for ev in order {
        let source = match class_counts.iter_mut().find(|(c, _)| *c == ev.class_id) {
            Some((_, n)) => {
                *n += 1;
                *n - 1
            }
            None => {
                class_counts.push((ev.class_id, 1));
                0
            }
        };
        for (i, dir) in ev.directions.iter().enumerate() {
            let azel = unit_to_azel(dir.normalized()).unwrap_or(AzEl::new(0.0, 0.0));
            rows.push((
                ev.onset_frame + i,
                ev.class_id,
                source,
                azel.azimuth_deg,
                azel.elevation_deg,
            ));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));

    let mut out = String::new();
    for (frame, class, source, az, el) in rows {
        out.push_str(&format!(
            "{frame},{class},{source},{},{}\n",
            format_degrees(az),
            format_degrees(el)
        ));
    }
    out
}

/// Serialize trackwise labels to metadata CSV with the track index as the
/// source column. Rows are ordered by (frame, class, track).
pub fn serialize_track_csv(labels: &ClipLabels) -> String {
    let mut rows: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
    for ev in labels.extract_instances(ACTIVITY_THRESHOLD) {
        // Recover the track that hosts this instance.
        let track = (0..labels.n_tracks())
            .find(|&k| {
                labels.activity(k, ev.onset_frame) >= ACTIVITY_THRESHOLD
                    && labels.sed(k, ev.onset_frame, ev.class_id) > 0.0
                    && labels.direction(k, ev.onset_frame) == ev.directions[0]
            })
            .unwrap_or(0);
        for (i, dir) in ev.directions.iter().enumerate() {
            let azel = unit_to_azel(dir.normalized()).unwrap_or(AzEl::new(0.0, 0.0));
            rows.push((
                ev.onset_frame + i,
                ev.class_id,
                track,
                azel.azimuth_deg,
                azel.elevation_deg,
            ));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    let mut out = String::new();
    for (frame, class, track, az, el) in rows {
        out.push_str(&format!(
            "{frame},{class},{track},{},{}\n",
            format_degrees(az),
            format_degrees(el)
        ));
    }
    out
}

/// Integral degrees print bare; everything else keeps six decimals.
fn format_degrees(v: f64) -> String {
    let nearest = v.round();
    if (v - nearest).abs() < 1e-9 {
        format!("{}", nearest as i64)
    } else {
        format!("{v:.6}")
    }
}
