//! Toy-scale spatial-acoustic feature fusion.
//!
//! Two stages, both pure forward passes over plain dense matrices:
//!
//! - cross-attention from CNN positions onto guide tokens
//!   (`Q = cnn*Wq`, `K = guide*Wk`, `V = guide*Wv`,
//!   `attended = rowsoftmax(Q*K^T / sqrt(C)) * V * Wo`), and
//! - a gated residual (`fused = cnn + tanh(attended*Wg) .* attended`).
//!
//! Weights are plain matrices, either seeded deterministically or loaded
//! from tensor files by the companion crate. No training happens here.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::trackwise::ClipLabels;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionError {
    /// Operand dimensions do not line up.
    ShapeMismatch,
    /// A guide sequence must carry at least one token.
    EmptyGuide,
}

impl fmt::Display for FusionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionError::ShapeMismatch => write!(f, "fusion operand shape mismatch"),
            FusionError::EmptyGuide => write!(f, "guide features need at least one token"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FusionError {}

/// Small dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, FusionError> {
        if data.len() != rows * cols {
            return Err(FusionError::ShapeMismatch);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
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

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.cols + col] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, FusionError> {
        if self.cols != other.rows {
            return Err(FusionError::ShapeMismatch);
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += a * other.at(k, j);
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix, FusionError> {
        if self.cols != other.cols {
            return Err(FusionError::ShapeMismatch);
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.at(i, k) * other.at(j, k);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }
}

/// Row-wise softmax with the usual max-shift for stability.
pub fn row_softmax(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let mut max = f64::NEG_INFINITY;
        for j in 0..m.cols() {
            max = max.max(m.at(i, j));
        }
        let mut sum = 0.0;
        for j in 0..m.cols() {
            let e = (m.at(i, j) - max).exp();
            out.set(i, j, e);
            sum += e;
        }
        for j in 0..m.cols() {
            out.set(i, j, out.at(i, j) / sum);
        }
    }
    out
}

/// Projection weights for one fusion stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    /// C x C query projection.
    pub query: Matrix,
    /// D x C key projection.
    pub key: Matrix,
    /// D x C value projection.
    pub value: Matrix,
    /// C x C gate projection.
    pub gate: Matrix,
    /// C x C output projection.
    pub output: Matrix,
}

impl FusionWeights {
    /// Deterministic random weights, uniform in +-1/sqrt(fan_in).
    pub fn seeded(seed: u64, cnn_channels: usize, guide_dim: usize) -> Self {
        let mut state = seed ^ 0xD6E8FEB86659FD93;
        let mut fill = |rows: usize, cols: usize| -> Matrix {
            let scale = 1.0 / (rows.max(1) as f64).sqrt();
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| (splitmix64(&mut state) * 2.0 - 1.0) * scale)
                .collect();
            Matrix::new(rows, cols, data).expect("sized data")
        };
        FusionWeights {
            query: fill(cnn_channels, cnn_channels),
            key: fill(guide_dim, cnn_channels),
            value: fill(guide_dim, cnn_channels),
            gate: fill(cnn_channels, cnn_channels),
            output: fill(cnn_channels, cnn_channels),
        }
    }

    pub fn check(&self, cnn_channels: usize, guide_dim: usize) -> Result<(), FusionError> {
        let ok = self.query.rows() == cnn_channels
            && self.query.cols() == cnn_channels
            && self.key.rows() == guide_dim
            && self.key.cols() == cnn_channels
            && self.value.rows() == guide_dim
            && self.value.cols() == cnn_channels
            && self.gate.rows() == cnn_channels
            && self.gate.cols() == cnn_channels
            && self.output.rows() == cnn_channels
            && self.output.cols() == cnn_channels;
        if ok {
            Ok(())
        } else {
            Err(FusionError::ShapeMismatch)
        }
    }
}

fn splitmix64(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
}

/// Cross-attention from CNN positions (N x C) onto guide tokens (L x D).
/// Every attention row sums to one; output is N x C.
pub fn saam_forward(
    cnn_feat: &Matrix,
    guide_feat: &Matrix,
    weights: &FusionWeights,
) -> Result<Matrix, FusionError> {
    if guide_feat.rows() == 0 {
        return Err(FusionError::EmptyGuide);
    }
    weights.check(cnn_feat.cols(), guide_feat.cols())?;
    let c = cnn_feat.cols();
    let q = cnn_feat.matmul(&weights.query)?;
    let k = guide_feat.matmul(&weights.key)?;
    let v = guide_feat.matmul(&weights.value)?;
    let mut logits = q.matmul_transposed(&k)?;
    let scale = 1.0 / (c as f64).sqrt();
    for i in 0..logits.rows() {
        for j in 0..logits.cols() {
            logits.set(i, j, logits.at(i, j) * scale);
        }
    }
    let attention = row_softmax(&logits);
    attention.matmul(&v)?.matmul(&weights.output)
}

/// Gated residual: `fused = cnn + tanh(attended*Wg) .* attended`.
pub fn fig_fuse(
    cnn_feat: &Matrix,
    attended: &Matrix,
    weights: &FusionWeights,
) -> Result<Matrix, FusionError> {
    if cnn_feat.rows() != attended.rows() || cnn_feat.cols() != attended.cols() {
        return Err(FusionError::ShapeMismatch);
    }
    let gate_in = attended.matmul(&weights.gate)?;
    let mut out = Matrix::zeros(cnn_feat.rows(), cnn_feat.cols());
    for i in 0..out.rows() {
        for j in 0..out.cols() {
            let gate = gate_in.at(i, j).tanh();
            out.set(i, j, cnn_feat.at(i, j) + gate * attended.at(i, j));
        }
    }
    Ok(out)
}

/// One full fusion stage: attention followed by the gated residual.
pub fn fuse(
    cnn_feat: &Matrix,
    guide_feat: &Matrix,
    weights: &FusionWeights,
) -> Result<Matrix, FusionError> {
    let attended = saam_forward(cnn_feat, guide_feat, weights)?;
    fig_fuse(cnn_feat, &attended, weights)
}

/// Build per-track guide tokens for one label frame: each track's direction
/// and SED row, concatenated and projected by `proj`
/// ((3 + n_classes) x D). Output is K x D.
pub fn guide_tokens(
    labels: &ClipLabels,
    frame: usize,
    proj: &Matrix,
) -> Result<Matrix, FusionError> {
    let raw_dim = 3 + labels.n_classes();
    if proj.rows() != raw_dim || frame >= labels.n_frames() {
        return Err(FusionError::ShapeMismatch);
    }
    let mut raw = Matrix::zeros(labels.n_tracks(), raw_dim);
    for k in 0..labels.n_tracks() {
        let d = labels.direction(k, frame);
        raw.set(k, 0, d.x);
        raw.set(k, 1, d.y);
        raw.set(k, 2, d.z);
        for c in 0..labels.n_classes() {
            raw.set(k, 3 + c, labels.sed(k, frame, c));
        }
    }
    raw.matmul(proj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded_matrix(seed: u64, rows: usize, cols: usize, scale: f64) -> Matrix {
        let mut state = seed;
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| (splitmix64(&mut state) * 2.0 - 1.0) * scale)
            .collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn single_token_attention_replicates_value() {
        let c = 3;
        let d = 2;
        let w = FusionWeights::seeded(7, c, d);
        let cnn = seeded_matrix(1, 4, c, 1.0);
        let guide = seeded_matrix(2, 1, d, 1.0);
        let out = saam_forward(&cnn, &guide, &w).unwrap();
        // With one token the attention weight is exactly 1, so every
        // position carries (v1) * Wo.
        let expect = guide.matmul(&w.value).unwrap().matmul(&w.output).unwrap();
        for i in 0..out.rows() {
            for j in 0..c {
                assert!((out.at(i, j) - expect.at(0, j)).abs() < 1e-12);
            }
        }
    }

    /// Independent dense-arithmetic oracle: index-by-index computation of
    /// the whole attention stage without the Matrix helpers.
    fn saam_oracle(cnn: &Matrix, guide: &Matrix, w: &FusionWeights) -> Vec<Vec<f64>> {
        let n = cnn.rows();
        let c = cnn.cols();
        let l = guide.rows();
        let d = guide.cols();
        let mut q = vec![vec![0.0; c]; n];
        for i in 0..n {
            for j in 0..c {
                for k in 0..c {
                    q[i][j] += cnn.at(i, k) * w.query.at(k, j);
                }
            }
        }
        let mut kk = vec![vec![0.0; c]; l];
        let mut vv = vec![vec![0.0; c]; l];
        for i in 0..l {
            for j in 0..c {
                for k in 0..d {
                    kk[i][j] += guide.at(i, k) * w.key.at(k, j);
                    vv[i][j] += guide.at(i, k) * w.value.at(k, j);
                }
            }
        }
        let mut attended = vec![vec![0.0; c]; n];
        for i in 0..n {
            let logits: Vec<f64> = (0..l)
                .map(|t| {
                    (0..c).map(|k| q[i][k] * kk[t][k]).sum::<f64>() / (c as f64).sqrt()
                })
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let mut mixed = vec![0.0; c];
            for t in 0..l {
                for k in 0..c {
                    mixed[k] += exps[t] / sum * vv[t][k];
                }
            }
            for j in 0..c {
                for k in 0..c {
                    attended[i][j] += mixed[k] * w.output.at(k, j);
                }
            }
        }
        attended
    }

    #[test]
    fn matches_dense_oracle() {
        let (c, d) = (2, 3);
        let w = FusionWeights::seeded(42, c, d);
        let cnn = seeded_matrix(5, 3, c, 1.5);
        let guide = seeded_matrix(6, 2, d, 1.5);
        let got = saam_forward(&cnn, &guide, &w).unwrap();
        let expect = saam_oracle(&cnn, &guide, &w);
        for i in 0..got.rows() {
            for j in 0..got.cols() {
                assert!(
                    (got.at(i, j) - expect[i][j]).abs() < 1e-12,
                    "({i}, {j}): {} vs {}",
                    got.at(i, j),
                    expect[i][j]
                );
            }
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant() {
        let logits = seeded_matrix(9, 6, 5, 3.0);
        let a = row_softmax(&logits);
        for i in 0..a.rows() {
            let sum: f64 = (0..a.cols()).map(|j| a.at(i, j)).sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
        // Adding a per-row constant leaves the softmax unchanged.
        let mut shifted = logits.clone();
        for i in 0..shifted.rows() {
            for j in 0..shifted.cols() {
                shifted.set(i, j, shifted.at(i, j) + 11.25);
            }
        }
        let b = row_softmax(&shifted);
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                assert!((a.at(i, j) - b.at(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_gate_is_identity() {
        let c = 4;
        let mut w = FusionWeights::seeded(3, c, c);
        w.gate = Matrix::zeros(c, c);
        let cnn = seeded_matrix(8, 5, c, 1.0);
        let attended = seeded_matrix(10, 5, c, 1.0);
        let fused = fig_fuse(&cnn, &attended, &w).unwrap();
        assert_eq!(fused, cnn);
    }

    #[test]
    fn gate_is_bounded() {
        let c = 3;
        let w = FusionWeights::seeded(5, c, c);
        let cnn = seeded_matrix(1, 6, c, 10.0);
        let attended = seeded_matrix(2, 6, c, 10.0);
        let fused = fig_fuse(&cnn, &attended, &w).unwrap();
        for i in 0..fused.rows() {
            for j in 0..fused.cols() {
                let delta = fused.at(i, j) - cnn.at(i, j);
                assert!(delta.abs() <= attended.at(i, j).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn fig_two_by_two_hand_case() {
        let c = 2;
        let mut w = FusionWeights::seeded(0, c, c);
        w.gate = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let cnn = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let attended = Matrix::new(2, 2, vec![0.5, -0.5, 0.25, 0.0]).unwrap();
        let fused = fig_fuse(&cnn, &attended, &w).unwrap();
        // gate = tanh(attended) elementwise with the identity projection
        let cases = [
            (0, 0, 1.0 + 0.5f64.tanh() * 0.5),
            (0, 1, 2.0 + (-0.5f64).tanh() * -0.5),
            (1, 0, 3.0 + 0.25f64.tanh() * 0.25),
            (1, 1, 4.0),
        ];
        for (i, j, expect) in cases {
            assert!((fused.at(i, j) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn output_shape_matches_cnn_input() {
        let (c, d) = (4, 3);
        let w = FusionWeights::seeded(1, c, d);
        let cnn = seeded_matrix(11, 7, c, 1.0);
        let guide = seeded_matrix(12, 5, d, 1.0);
        let fused = fuse(&cnn, &guide, &w).unwrap();
        assert_eq!((fused.rows(), fused.cols()), (7, c));
        // Progressive stages compose: feed the output back in.
        let again = fuse(&fused, &guide, &w).unwrap();
        assert_eq!((again.rows(), again.cols()), (7, c));
    }

    #[test]
    fn empty_guide_is_an_error() {
        let w = FusionWeights::seeded(1, 2, 2);
        let cnn = seeded_matrix(1, 3, 2, 1.0);
        let guide = Matrix::zeros(0, 2);
        assert_eq!(
            saam_forward(&cnn, &guide, &w).unwrap_err(),
            FusionError::EmptyGuide
        );
    }

    #[test]
    fn guide_tokens_shapes() {
        use crate::geometry::DirectionVector;
        let mut labels = ClipLabels::empty(6, 4, 13);
        labels.set_active_frame(2, 1, 5, DirectionVector::new(0.0, 1.0, 0.0));
        let proj = seeded_matrix(8, 16, 64, 0.5);
        let tokens = guide_tokens(&labels, 1, &proj).unwrap();
        assert_eq!((tokens.rows(), tokens.cols()), (6, 64));
        let bad = seeded_matrix(8, 15, 64, 0.5);
        assert_eq!(
            guide_tokens(&labels, 1, &bad).unwrap_err(),
            FusionError::ShapeMismatch
        );
    }
}
