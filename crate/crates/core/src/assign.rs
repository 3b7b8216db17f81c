//! Hungarian assignment and permutation-invariant track losses.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::trackwise::ClipLabels;

/// Cost charged for columns padded in when a matrix has more rows than
/// columns. Large enough to dominate any real SELD cost (angles, MSE, BCE).
pub const PAD_COST: f64 = 1e9;

/// Probability clamp for binary cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssignError {
    /// Cost entry is NaN or infinite.
    NonFinite { row: usize, col: usize },
    /// Data length does not match rows x cols, or label shapes differ.
    ShapeMismatch,
    /// A probability fell outside [0, 1] before clamping.
    InvalidProbability { track: usize, frame: usize },
}

impl fmt::Display for AssignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssignError::NonFinite { row, col } => {
                write!(f, "non-finite cost at ({row}, {col})")
            }
            AssignError::ShapeMismatch => write!(f, "cost/label shape mismatch"),
            AssignError::InvalidProbability { track, frame } => {
                write!(f, "probability outside [0, 1] at track {track}, frame {frame}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AssignError {}

/// Dense rows x cols cost matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignError> {
        if data.len() != rows * cols {
            return Err(AssignError::ShapeMismatch);
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(AssignError::NonFinite {
                    row: i / cols.max(1),
                    col: i % cols.max(1),
                });
            }
        }
        Ok(CostMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// Result of a minimum-cost assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column for each row; `None` when the row fell on a padded column
    /// (only possible when rows > cols).
    pub row_to_col: Vec<Option<usize>>,
    /// Total cost over real (non-padded) pairs.
    pub cost: f64,
}

/// Kuhn-Munkres with potentials (shortest augmenting path), rows <= cols.
/// Returns the minimal total cost.
fn km_min_cost(rows: usize, cols: usize, cost: &impl Fn(usize, usize) -> f64) -> f64 {
    debug_assert!(rows <= cols);
    if rows == 0 {
        return 0.0;
    }
    let (n, m) = (rows, cols);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    // p[j] = 1-based row matched to 1-based column j; 0 = unmatched
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=m {
        if p[j] != 0 {
            total += cost(p[j] - 1, j - 1);
        }
    }
    total
}

/// Minimum-cost assignment with a deterministic, lexicographically smallest
/// solution among optima.
///
/// Rows in excess of columns are matched to padded columns costing
/// [`PAD_COST`] and reported as `None`. The lexicographic tie-break is
/// realized by fixing rows in order: each row takes the lowest column whose
/// choice still permits an optimal completion.
pub fn hungarian(c: &CostMatrix) -> Result<Assignment, AssignError> {
    let rows = c.rows();
    let real_cols = c.cols();
    let eff_cols = real_cols.max(rows);
    let cost = |i: usize, j: usize| -> f64 {
        if j < real_cols {
            c.at(i, j)
        } else {
            PAD_COST
        }
    };

    let mut remaining: Vec<usize> = (0..eff_cols).collect();
    let mut picks: Vec<usize> = Vec::with_capacity(rows);
    for i in 0..rows {
        let rows_left = rows - i - 1;
        let mut best_idx = 0usize;
        let mut best_total = f64::INFINITY;
        for (idx, &j) in remaining.iter().enumerate() {
            let sub = if rows_left == 0 {
                0.0
            } else {
                let cols_left: Vec<usize> = remaining
                    .iter()
                    .copied()
                    .filter(|&jj| jj != j)
                    .collect();
                km_min_cost(rows_left, cols_left.len(), &|r, cc| {
                    cost(i + 1 + r, cols_left[cc])
                })
            };
            let total = cost(i, j) + sub;
            if total < best_total {
                best_total = total;
                best_idx = idx;
            }
        }
        picks.push(remaining.remove(best_idx));
    }

    let row_to_col: Vec<Option<usize>> = picks
        .iter()
        .map(|&j| if j < real_cols { Some(j) } else { None })
        .collect();
    let cost_sum: f64 = picks
        .iter()
        .enumerate()
        .filter(|&(_, &j)| j < real_cols)
        .map(|(i, &j)| c.at(i, j))
        .sum();

    Ok(Assignment {
        row_to_col,
        cost: cost_sum,
    })
}

/// Loss value and the track permutation that realizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct PitOutcome {
    pub loss: f64,
    /// `permutation[pred_track] = reference track`.
    pub permutation: Vec<usize>,
}

fn square_assignment(costs: &CostMatrix) -> Result<PitOutcome, AssignError> {
    let n = costs.rows();
    let assignment = hungarian(costs)?;
    let permutation: Vec<usize> = assignment
        .row_to_col
        .iter()
        .map(|c| c.expect("square matrix leaves no row unassigned"))
        .collect();
    // Sum matched costs in value order so the loss is bit-identical under
    // any permutation of the input tracks.
    let mut matched: Vec<f64> = permutation
        .iter()
        .enumerate()
        .map(|(row, &col)| costs.at(row, col))
        .collect();
    matched.sort_by(f64::total_cmp);
    let total: f64 = matched.iter().sum();
    Ok(PitOutcome {
        loss: if n == 0 { 0.0 } else { total / n as f64 },
        permutation,
    })
}

fn check_shapes(pred: &ClipLabels, reference: &ClipLabels) -> Result<(), AssignError> {
    if pred.n_tracks() != reference.n_tracks()
        || pred.n_frames() != reference.n_frames()
        || pred.n_classes() != reference.n_classes()
    {
        return Err(AssignError::ShapeMismatch);
    }
    Ok(())
}

/// Mean squared Cartesian error between a predicted and a reference track,
/// over reference-active frames only.
fn doa_pair_cost(pred: &ClipLabels, reference: &ClipLabels, kp: usize, kr: usize) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 0..reference.n_frames() {
        if reference.activity(kr, t) >= crate::trackwise::ACTIVITY_THRESHOLD {
            let p = pred.direction(kp, t);
            let r = reference.direction(kr, t);
            let (dx, dy, dz) = (p.x - r.x, p.y - r.y, p.z - r.z);
            sum += dx * dx + dy * dy + dz * dz;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn validate_probabilities(labels: &ClipLabels) -> Result<(), AssignError> {
    for k in 0..labels.n_tracks() {
        for t in 0..labels.n_frames() {
            for c in 0..labels.n_classes() {
                let p = labels.sed(k, t, c);
                if !(0.0..=1.0).contains(&p) {
                    return Err(AssignError::InvalidProbability { track: k, frame: t });
                }
            }
        }
    }
    Ok(())
}

/// Mean binary cross-entropy between two tracks' SED matrices.
fn sed_pair_cost(pred: &ClipLabels, reference: &ClipLabels, kp: usize, kr: usize) -> f64 {
    let p = pred.track_sed(kp);
    let r = reference.track_sed(kr);
    let total: f64 = p.iter().zip(r).map(|(&pp, &yy)| bce(pp, yy)).sum();
    total / p.len() as f64
}

/// Permutation-invariant DoA loss: per track pair, the mean squared
/// Cartesian error over reference-active frames; Hungarian over tracks.
pub fn pit_doa_loss(pred: &ClipLabels, reference: &ClipLabels) -> Result<PitOutcome, AssignError> {
    check_shapes(pred, reference)?;
    let k = pred.n_tracks();
    let mut data = Vec::with_capacity(k * k);
    for kp in 0..k {
        for kr in 0..k {
            data.push(doa_pair_cost(pred, reference, kp, kr));
        }
    }
    square_assignment(&CostMatrix::new(k, k, data)?)
}

/// Permutation-invariant SED loss: per track pair, the mean binary
/// cross-entropy over frames and classes; Hungarian over tracks.
pub fn pit_sed_loss(pred: &ClipLabels, reference: &ClipLabels) -> Result<PitOutcome, AssignError> {
    check_shapes(pred, reference)?;
    validate_probabilities(pred)?;
    validate_probabilities(reference)?;
    let k = pred.n_tracks();
    let mut data = Vec::with_capacity(k * k);
    for kp in 0..k {
        for kr in 0..k {
            data.push(sed_pair_cost(pred, reference, kp, kr));
        }
    }
    square_assignment(&CostMatrix::new(k, k, data)?)
}

/// Combined-cost mode: one Hungarian over the summed DoA and SED pair costs.
pub fn pit_joint_loss(
    pred: &ClipLabels,
    reference: &ClipLabels,
) -> Result<PitOutcome, AssignError> {
    check_shapes(pred, reference)?;
    validate_probabilities(pred)?;
    validate_probabilities(reference)?;
    let k = pred.n_tracks();
    let mut data = Vec::with_capacity(k * k);
    for kp in 0..k {
        for kr in 0..k {
            data.push(
                doa_pair_cost(pred, reference, kp, kr) + sed_pair_cost(pred, reference, kp, kr),
            );
        }
    }
    square_assignment(&CostMatrix::new(k, k, data)?)
}
