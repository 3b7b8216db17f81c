//! Spectral tensors, the mel filterbank, and spatial feature extraction.
//!
//! [`SpectralTensor`] holds complex STFT coefficients indexed by
//! (channel, frame, bin). [`FeatureTensor`] holds real features indexed by
//! (feature channel, frame, mel band). The filterbank uses triangular
//! HTK-scale filters spanning 0 to Nyquist with no area normalization.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Log floor applied to mel band powers before taking the natural log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Guard added to intensity-vector norms before per-bin normalization.
pub const IV_NORM_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralError {
    /// Requested more mel bands than spectral bins.
    TooManyMelBands { n_mels: usize, bins: usize },
    /// Intensity vectors need exactly 4 channels ordered (W, X, Y, Z).
    NotFoaChannels { got: usize },
    /// Tensor shapes do not line up.
    ShapeMismatch,
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralError::TooManyMelBands { n_mels, bins } => {
                write!(f, "{n_mels} mel bands exceed {bins} spectral bins")
            }
            SpectralError::NotFoaChannels { got } => {
                write!(f, "expected 4 FoA channels (W, X, Y, Z), got {got}")
            }
            SpectralError::ShapeMismatch => write!(f, "tensor shape mismatch"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpectralError {}

/// Complex STFT coefficients for one clip: channels x frames x bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTensor {
    coefficients: Vec<Complex64>,
    n_channels: usize,
    n_frames: usize,
    n_bins: usize,
    fft_size: usize,
    window_s: f64,
    hop_s: f64,
    sample_rate: u32,
}

impl SpectralTensor {
    pub fn new(
        coefficients: Vec<Complex64>,
        n_channels: usize,
        n_frames: usize,
        n_bins: usize,
        fft_size: usize,
        window_s: f64,
        hop_s: f64,
        sample_rate: u32,
    ) -> Result<Self, SpectralError> {
        if coefficients.len() != n_channels * n_frames * n_bins || n_bins != fft_size / 2 + 1 {
            return Err(SpectralError::ShapeMismatch);
        }
        Ok(SpectralTensor {
            coefficients,
            n_channels,
            n_frames,
            n_bins,
            fft_size,
            window_s,
            hop_s,
            sample_rate,
        })
    }

    /// All-zero tensor with the given shape.
    pub fn zeros(
        n_channels: usize,
        n_frames: usize,
        fft_size: usize,
        window_s: f64,
        hop_s: f64,
        sample_rate: u32,
    ) -> Self {
        let n_bins = fft_size / 2 + 1;
        SpectralTensor {
            coefficients: vec![Complex64::new(0.0, 0.0); n_channels * n_frames * n_bins],
            n_channels,
            n_frames,
            n_bins,
            fft_size,
            window_s,
            hop_s,
            sample_rate,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Center frequency of a bin in Hz.
    pub fn bin_frequency_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.fft_size as f64
    }

    #[inline]
    fn index(&self, channel: usize, frame: usize, bin: usize) -> usize {
        (channel * self.n_frames + frame) * self.n_bins + bin
    }

    #[inline]
    pub fn value(&self, channel: usize, frame: usize, bin: usize) -> Complex64 {
        self.coefficients[self.index(channel, frame, bin)]
    }

    #[inline]
    pub fn set_value(&mut self, channel: usize, frame: usize, bin: usize, v: Complex64) {
        let i = self.index(channel, frame, bin);
        self.coefficients[i] = v;
    }

    /// One frame of one channel as a contiguous bin slice.
    pub fn frame(&self, channel: usize, frame: usize) -> &[Complex64] {
        let start = self.index(channel, frame, 0);
        &self.coefficients[start..start + self.n_bins]
    }

    pub fn frame_mut(&mut self, channel: usize, frame: usize) -> &mut [Complex64] {
        let start = self.index(channel, frame, 0);
        let end = start + self.n_bins;
        &mut self.coefficients[start..end]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }
}

/// Layout tag for a [`FeatureTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    /// Per-channel log-mel spectrograms.
    LogMel,
    /// Intensity-vector components (Ix, Iy, Iz).
    Iv,
    /// Log-mels followed by intensity vectors.
    Combined,
}

/// Real feature values: feature channels x frames x mel bands.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    values: Vec<f64>,
    n_channels: usize,
    n_frames: usize,
    n_bands: usize,
    layout: FeatureLayout,
}

impl FeatureTensor {
    pub fn new(
        values: Vec<f64>,
        n_channels: usize,
        n_frames: usize,
        n_bands: usize,
        layout: FeatureLayout,
    ) -> Result<Self, SpectralError> {
        if values.len() != n_channels * n_frames * n_bands {
            return Err(SpectralError::ShapeMismatch);
        }
        Ok(FeatureTensor {
            values,
            n_channels,
            n_frames,
            n_bands,
            layout,
        })
    }

    pub fn zeros(n_channels: usize, n_frames: usize, n_bands: usize, layout: FeatureLayout) -> Self {
        FeatureTensor {
            values: vec![0.0; n_channels * n_frames * n_bands],
            n_channels,
            n_frames,
            n_bands,
            layout,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    #[inline]
    fn index(&self, channel: usize, frame: usize, band: usize) -> usize {
        (channel * self.n_frames + frame) * self.n_bands + band
    }

    #[inline]
    pub fn value(&self, channel: usize, frame: usize, band: usize) -> f64 {
        self.values[self.index(channel, frame, band)]
    }

    #[inline]
    pub fn set_value(&mut self, channel: usize, frame: usize, band: usize, v: f64) {
        let i = self.index(channel, frame, band);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Triangular HTK-scale mel filterbank spanning 0 to Nyquist.
///
/// Filters are stored sparsely as (first bin, weights) per band; weights are
/// not area-normalized.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    bands: Vec<(usize, Vec<f64>)>,
    n_bins: usize,
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_bins: usize, fft_size: usize, sample_rate: u32) -> Result<Self, SpectralError> {
        if n_mels > n_bins {
            return Err(SpectralError::TooManyMelBands { n_mels, bins: n_bins });
        }
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / fft_size as f64;

        let mut bands = Vec::with_capacity(n_mels);
        for b in 0..n_mels {
            let (left, center, right) = (edges[b], edges[b + 1], edges[b + 2]);
            let mut first = None;
            let mut weights = Vec::new();
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f >= left && f <= center && center > left {
                    (f - left) / (center - left)
                } else if f > center && f <= right && right > center {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
                if w > 0.0 {
                    if first.is_none() {
                        first = Some(k);
                    }
                    weights.push(w);
                } else if first.is_some() {
                    break;
                }
            }
            bands.push((first.unwrap_or(0), weights));
        }
        Ok(MelFilterbank { bands, n_bins })
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Weight of `bin` in `band` (zero outside the triangle).
    pub fn weight(&self, band: usize, bin: usize) -> f64 {
        let (first, ref w) = self.bands[band];
        if bin >= first && bin < first + w.len() {
            w[bin - first]
        } else {
            0.0
        }
    }

    /// Sum of weights of one band.
    pub fn band_weight_sum(&self, band: usize) -> f64 {
        self.bands[band].1.iter().sum()
    }

    /// Weighted sum of `per_bin` values over one band's support.
    pub fn apply_band(&self, band: usize, per_bin: &[f64]) -> f64 {
        let (first, ref w) = self.bands[band];
        w.iter()
            .zip(&per_bin[first..first + w.len()])
            .map(|(wk, v)| wk * v)
            .sum()
    }
}

/// Per-channel log-mel features: `ln(max(melfb * |X|^2, floor))`.
pub fn logmel(
    spec: &SpectralTensor,
    n_mels: usize,
    floor: f64,
) -> Result<FeatureTensor, SpectralError> {
    let fb = MelFilterbank::new(n_mels, spec.n_bins(), spec.fft_size(), spec.sample_rate())?;
    let mut out = FeatureTensor::zeros(spec.n_channels(), spec.n_frames(), n_mels, FeatureLayout::LogMel);
    let mut power = vec![0.0; spec.n_bins()];
    for ch in 0..spec.n_channels() {
        for t in 0..spec.n_frames() {
            for (p, c) in power.iter_mut().zip(spec.frame(ch, t)) {
                *p = c.norm_sqr();
            }
            for b in 0..n_mels {
                out.set_value(ch, t, b, fb.apply_band(b, &power).max(floor).ln());
            }
        }
    }
    Ok(out)
}

/// Acoustic intensity vectors from a 4-channel FoA spectral tensor.
///
/// Per TF bin, `I = Re{conj(W) * (X, Y, Z)}`, unit-normalized with a small
/// guard, then aggregated into mel bands by filter-weighted mean. Output is
/// 3 x frames x `n_mels`.
pub fn intensity_vectors(
    spec: &SpectralTensor,
    n_mels: usize,
) -> Result<FeatureTensor, SpectralError> {
    if spec.n_channels() != 4 {
        return Err(SpectralError::NotFoaChannels {
            got: spec.n_channels(),
        });
    }
    let fb = MelFilterbank::new(n_mels, spec.n_bins(), spec.fft_size(), spec.sample_rate())?;
    let mut out = FeatureTensor::zeros(3, spec.n_frames(), n_mels, FeatureLayout::Iv);
    let n_bins = spec.n_bins();
    let mut ix = vec![0.0; n_bins];
    let mut iy = vec![0.0; n_bins];
    let mut iz = vec![0.0; n_bins];
    for t in 0..spec.n_frames() {
        let w = spec.frame(0, t);
        let x = spec.frame(1, t);
        let y = spec.frame(2, t);
        let z = spec.frame(3, t);
        for k in 0..n_bins {
            let wc = w[k].conj();
            let gx = (wc * x[k]).re;
            let gy = (wc * y[k]).re;
            let gz = (wc * z[k]).re;
            let norm = (gx * gx + gy * gy + gz * gz).sqrt() + IV_NORM_GUARD;
            ix[k] = gx / norm;
            iy[k] = gy / norm;
            iz[k] = gz / norm;
        }
        for b in 0..n_mels {
            let wsum = fb.band_weight_sum(b);
            out.set_value(0, t, b, fb.apply_band(b, &ix) / wsum);
            out.set_value(1, t, b, fb.apply_band(b, &iy) / wsum);
            out.set_value(2, t, b, fb.apply_band(b, &iz) / wsum);
        }
    }
    Ok(out)
}

/// Concatenate log-mels and intensity vectors into the combined feature
/// layout, channel order (W, X, Y, Z log-mel, Ix, Iy, Iz).
pub fn assemble_features(
    logmels: &FeatureTensor,
    ivs: &FeatureTensor,
) -> Result<FeatureTensor, SpectralError> {
    if logmels.n_frames() != ivs.n_frames() || logmels.n_bands() != ivs.n_bands() {
        return Err(SpectralError::ShapeMismatch);
    }
    let n_channels = logmels.n_channels() + ivs.n_channels();
    let mut values = Vec::with_capacity(n_channels * logmels.n_frames() * logmels.n_bands());
    values.extend_from_slice(logmels.values());
    values.extend_from_slice(ivs.values());
    FeatureTensor::new(
        values,
        n_channels,
        logmels.n_frames(),
        logmels.n_bands(),
        FeatureLayout::Combined,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone_tensor() -> SpectralTensor {
        // 4-channel single-frame spectrum representing a plane wave from
        // (az=0, el=0): X = W, Y = Z = 0.
        let fft_size = 64;
        let n_bins = fft_size / 2 + 1;
        let mut spec = SpectralTensor::zeros(4, 1, fft_size, 0.04, 0.02, 24000);
        for k in 0..n_bins {
            let w = Complex64::new((k as f64 * 0.37).cos(), (k as f64 * 0.81).sin());
            spec.set_value(0, 0, k, w);
            spec.set_value(1, 0, k, w);
        }
        spec
    }

    #[test]
    fn filterbank_row_sums_positive_at_paper_settings() {
        // 24 kHz / 960-point FFT -> 481 bins; 64 bands.
        let fb = MelFilterbank::new(64, 481, 960, 24000).unwrap();
        for b in 0..64 {
            assert!(
                fb.band_weight_sum(b) > 0.0,
                "band {b} has zero weight sum"
            );
        }
    }

    #[test]
    fn filterbank_rejects_too_many_bands() {
        assert_eq!(
            MelFilterbank::new(40, 33, 64, 24000).unwrap_err(),
            SpectralError::TooManyMelBands { n_mels: 40, bins: 33 }
        );
    }

    #[test]
    fn logmel_floor_on_zero_spectrum() {
        let spec = SpectralTensor::zeros(2, 3, 64, 0.04, 0.02, 24000);
        let lm = logmel(&spec, 16, LOG_FLOOR).unwrap();
        let expect = LOG_FLOOR.ln();
        assert!(lm.values().iter().all(|&v| v == expect));
    }

    #[test]
    fn logmel_impulse_matches_filter_weights() {
        // Unit power in a single bin: band energy equals that bin's weight.
        let fft_size = 64;
        let bin = 10;
        let mut spec = SpectralTensor::zeros(1, 1, fft_size, 0.04, 0.02, 24000);
        spec.set_value(0, 0, bin, Complex64::new(1.0, 0.0));
        let n_mels = 8;
        let fb = MelFilterbank::new(n_mels, spec.n_bins(), fft_size, 24000).unwrap();
        let lm = logmel(&spec, n_mels, LOG_FLOOR).unwrap();
        for b in 0..n_mels {
            let expect = fb.weight(b, bin).max(LOG_FLOOR).ln();
            assert!((lm.value(0, 0, b) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn logmel_monotone_in_band_power() {
        let fft_size = 64;
        let mut lo = SpectralTensor::zeros(1, 1, fft_size, 0.04, 0.02, 24000);
        let mut hi = SpectralTensor::zeros(1, 1, fft_size, 0.04, 0.02, 24000);
        for k in 0..lo.n_bins() {
            lo.set_value(0, 0, k, Complex64::new(0.5, 0.1));
            hi.set_value(0, 0, k, Complex64::new(1.0, 0.2));
        }
        let a = logmel(&lo, 8, LOG_FLOOR).unwrap();
        let b = logmel(&hi, 8, LOG_FLOOR).unwrap();
        for band in 0..8 {
            assert!(b.value(0, 0, band) >= a.value(0, 0, band));
        }
    }

    #[test]
    fn iv_requires_four_channels() {
        let spec = SpectralTensor::zeros(3, 1, 64, 0.04, 0.02, 24000);
        assert_eq!(
            intensity_vectors(&spec, 8).unwrap_err(),
            SpectralError::NotFoaChannels { got: 3 }
        );
    }

    #[test]
    fn iv_zero_signal_gives_zero_vectors() {
        let spec = SpectralTensor::zeros(4, 2, 64, 0.04, 0.02, 24000);
        let iv = intensity_vectors(&spec, 8).unwrap();
        assert!(iv.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iv_axis_source_points_along_x() {
        let spec = tone_tensor();
        let iv = intensity_vectors(&spec, 8).unwrap();
        for b in 0..8 {
            let ix = iv.value(0, 0, b);
            let iy = iv.value(1, 0, b);
            let iz = iv.value(2, 0, b);
            assert!(ix > 0.99, "band {b}: ix = {ix}");
            assert!(iy.abs() < 1e-9 && iz.abs() < 1e-9);
        }
    }

    #[test]
    fn assemble_combined_shape_and_order() {
        let lm = FeatureTensor::zeros(4, 5, 16, FeatureLayout::LogMel);
        let mut iv = FeatureTensor::zeros(3, 5, 16, FeatureLayout::Iv);
        iv.set_value(1, 2, 3, 0.75);
        let combined = assemble_features(&lm, &iv).unwrap();
        assert_eq!(combined.n_channels(), 7);
        assert_eq!(combined.n_frames(), 5);
        assert_eq!(combined.n_bands(), 16);
        assert_eq!(combined.layout(), FeatureLayout::Combined);
        // IV channel 1 lands at combined channel 5.
        assert_eq!(combined.value(5, 2, 3), 0.75);
    }

    #[test]
    fn assemble_rejects_mismatched_frames() {
        let lm = FeatureTensor::zeros(4, 5, 16, FeatureLayout::LogMel);
        let iv = FeatureTensor::zeros(3, 6, 16, FeatureLayout::Iv);
        assert_eq!(
            assemble_features(&lm, &iv).unwrap_err(),
            SpectralError::ShapeMismatch
        );
    }
}
