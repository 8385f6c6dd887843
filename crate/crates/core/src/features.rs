//! Statistical features over wavelet coefficients.
//!
//! Each channel of a segment is decomposed, the selected coefficient sets
//! are concatenated, and five statistics summarize them. A segment's
//! feature vector is the per-channel blocks in the segment's channel
//! order, so its length is always 5 * channel count.

use serde::{Deserialize, Serialize};

use crate::dwt::{self, subband_map, DwtError, ExtensionMode, Rhythm, WaveletFilterPair};
use crate::signal_io::{Channel, EmotionLabel, Segment};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("cannot compute statistics of an empty coefficient set")]
    EmptyInput,
    #[error("dataset contains no vectors")]
    EmptyDataset,
    #[error("vector has {found} values where {expected} were expected")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no coefficient set is labeled theta at {sampling_rate} Hz with {levels} level(s)")]
    NoThetaSubband { sampling_rate: f64, levels: usize },
    #[error("segment length must be positive")]
    ZeroSegmentLength,
    #[error(transparent)]
    Dwt(#[from] DwtError),
}

/// The five summary statistics of one channel's coefficients, in the
/// order they appear inside feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelFeatures {
    /// max |c|
    pub abs_max: f64,
    /// mean of |c|
    pub mean_abs: f64,
    /// population standard deviation
    pub std_dev: f64,
    /// mean of c^2 over the coefficient count
    pub avg_power: f64,
    /// sum of c^2 over the originating segment's sample count
    pub avg_energy: f64,
}

impl ChannelFeatures {
    pub fn to_array(self) -> [f64; 5] {
        [
            self.abs_max,
            self.mean_abs,
            self.std_dev,
            self.avg_power,
            self.avg_energy,
        ]
    }
}

/// Which coefficient sets feed the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandPolicy {
    /// Every detail level plus the deepest approximation.
    #[default]
    All,
    /// Only the sets whose range is tagged theta (4-8 Hz).
    Theta,
}

impl std::str::FromStr for BandPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(BandPolicy::All),
            "theta" => Ok(BandPolicy::Theta),
            other => Err(format!("unknown band policy {other:?} (expected all or theta)")),
        }
    }
}

/// One classified sample: the concatenated channel statistics plus the
/// label and the channel order the blocks follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: EmotionLabel,
    pub channel_order: Vec<Channel>,
}

/// Vectors of equal shape, ready for a classifier. `class_count` is fixed
/// by the three-state label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub vectors: Vec<FeatureVector>,
    pub class_count: usize,
}

impl LabeledDataset {
    pub fn from_vectors(vectors: Vec<FeatureVector>) -> Result<Self, FeatureError> {
        let first = vectors.first().ok_or(FeatureError::EmptyDataset)?;
        let dim = first.values.len();
        let order = first.channel_order.clone();
        for v in &vectors {
            if v.values.len() != dim {
                return Err(FeatureError::DimensionMismatch {
                    expected: dim,
                    found: v.values.len(),
                });
            }
            debug_assert_eq!(v.channel_order, order, "mixed channel orders in one dataset");
        }
        Ok(LabeledDataset {
            vectors,
            class_count: EmotionLabel::ALL.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.values.len())
    }
}

/// Per-dimension moments of the training set, used to z-score queries.
/// Dimensions whose training variance is zero keep `std_dev = 0` and are
/// passed through untouched by [`ScalingParams::apply`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl ScalingParams {
    pub fn apply(&self, values: &mut [f64]) {
        for (i, v) in values.iter_mut().enumerate() {
            if self.std_devs[i] > 0.0 {
                *v = (*v - self.means[i]) / self.std_devs[i];
            }
        }
    }
}

/// The five statistics of one coefficient set.
///
/// `segment_len` is the sample count of the segment the coefficients came
/// from: average power divides by the coefficient count, average energy
/// by the segment length, and the two differ exactly when those counts do.
pub fn channel_statistics(
    coeffs: &[f64],
    segment_len: usize,
) -> Result<ChannelFeatures, FeatureError> {
    if coeffs.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    if segment_len == 0 {
        return Err(FeatureError::ZeroSegmentLength);
    }
    let n = coeffs.len() as f64;
    let mut abs_max = 0.0f64;
    let mut abs_sum = 0.0;
    let mut sum = 0.0;
    let mut sq_sum = 0.0;
    for &c in coeffs {
        abs_max = abs_max.max(c.abs());
        abs_sum += c.abs();
        sum += c;
        sq_sum += c * c;
    }
    let mean = sum / n;
    let variance = (0..coeffs.len())
        .map(|i| (coeffs[i] - mean) * (coeffs[i] - mean))
        .sum::<f64>()
        / n;
    Ok(ChannelFeatures {
        abs_max,
        mean_abs: abs_sum / n,
        std_dev: variance.sqrt(),
        avg_power: sq_sum / n,
        avg_energy: sq_sum / segment_len as f64,
    })
}

/// Coefficient sets of one decomposition selected by `policy`, flattened
/// in order d1, d2, ..., dL, aL.
fn selected_coefficients(
    dec: &dwt::WaveletDecomposition,
    sampling_rate: f64,
    policy: BandPolicy,
) -> Result<Vec<f64>, FeatureError> {
    match policy {
        BandPolicy::All => {
            let mut all = Vec::new();
            for d in &dec.details {
                all.extend_from_slice(d);
            }
            all.extend_from_slice(&dec.approximation);
            Ok(all)
        }
        BandPolicy::Theta => {
            let map = subband_map(sampling_rate, dec.levels)?;
            let mut selected = Vec::new();
            for (set, range) in dec
                .details
                .iter()
                .chain(std::iter::once(&dec.approximation))
                .zip(&map)
            {
                if range.rhythm == Rhythm::Theta {
                    selected.extend_from_slice(set);
                }
            }
            if selected.is_empty() {
                return Err(FeatureError::NoThetaSubband {
                    sampling_rate,
                    levels: dec.levels,
                });
            }
            Ok(selected)
        }
    }
}

/// Decomposes every channel of a segment and assembles the feature vector.
pub fn segment_features(
    segment: &Segment,
    filters: &WaveletFilterPair,
    levels: usize,
    mode: ExtensionMode,
    policy: BandPolicy,
) -> Result<FeatureVector, FeatureError> {
    let mut values = Vec::with_capacity(5 * segment.channels.len());
    for channel in &segment.channel_data {
        let dec = dwt::wavedec(channel, filters, levels, mode)?;
        let coeffs = selected_coefficients(&dec, segment.sampling_rate, policy)?;
        let stats = channel_statistics(&coeffs, segment.window_length)?;
        values.extend_from_slice(&stats.to_array());
    }
    Ok(FeatureVector {
        values,
        label: segment.label,
        channel_order: segment.channels.clone(),
    })
}

/// Z-scores both sets using moments of `train` alone (population standard
/// deviation). Returns the transformed sets and the parameters so later
/// queries can be mapped identically.
pub fn standardize(
    train: &[FeatureVector],
    test: &[FeatureVector],
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>, ScalingParams), FeatureError> {
    let first = train.first().ok_or(FeatureError::EmptyDataset)?;
    let dim = first.values.len();
    for v in train.iter().chain(test) {
        if v.values.len() != dim {
            return Err(FeatureError::DimensionMismatch {
                expected: dim,
                found: v.values.len(),
            });
        }
    }

    let n = train.len() as f64;
    let mut means = vec![0.0; dim];
    for v in train {
        for (m, x) in means.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut std_devs = vec![0.0; dim];
    for v in train {
        for (s, (x, m)) in std_devs.iter_mut().zip(v.values.iter().zip(&means)) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut std_devs {
        *s = (*s / n).sqrt();
    }

    let params = ScalingParams { means, std_devs };
    let transform = |vs: &[FeatureVector]| {
        vs.iter()
            .map(|v| {
                let mut out = v.clone();
                params.apply(&mut out.values);
                out
            })
            .collect::<Vec<_>>()
    };
    Ok((transform(train), transform(test), params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::Channel;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    fn segment_of(channel_data: Vec<Vec<f64>>, sampling_rate: f64) -> Segment {
        let window_length = channel_data[0].len();
        Segment {
            channels: Channel::ALL[..channel_data.len()].to_vec(),
            channel_data,
            window_length,
            sampling_rate,
            source_session: 1,
            source_id: 0,
            offset: 0,
            label: EmotionLabel::Neutral,
        }
    }

    #[test]
    fn hand_computed_statistics_for_two_coefficients() {
        // coeffs [3, -4]: mean -0.5, deviations +/-3.5.
        let s = channel_statistics(&[3.0, -4.0], 2).unwrap();
        assert!(close(s.abs_max, 4.0));
        assert!(close(s.mean_abs, 3.5));
        assert!(close(s.std_dev, 3.5));
        assert!(close(s.avg_power, 12.5));
        assert!(close(s.avg_energy, 12.5));
    }

    #[test]
    fn power_and_energy_differ_exactly_by_the_count_ratio() {
        // Same coefficients, but originating from an 8-sample segment.
        let s = channel_statistics(&[3.0, -4.0], 8).unwrap();
        assert!(close(s.avg_power, 12.5));
        assert!(close(s.avg_energy, 25.0 / 8.0));
        assert!(close(s.avg_energy, s.avg_power * 2.0 / 8.0));
    }

    #[test]
    fn all_zero_coefficients_give_all_zero_statistics() {
        let s = channel_statistics(&[0.0; 6], 6).unwrap();
        assert_eq!(s.to_array(), [0.0; 5]);
    }

    #[test]
    fn unit_alternating_coefficients() {
        let s = channel_statistics(&[1.0, -1.0, 1.0, -1.0], 4).unwrap();
        assert!(close(s.abs_max, 1.0));
        assert!(close(s.mean_abs, 1.0));
        assert!(close(s.std_dev, 1.0));
        assert!(close(s.avg_power, 1.0));
        assert!(close(s.avg_energy, 1.0));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(
            channel_statistics(&[], 4),
            Err(FeatureError::EmptyInput)
        ));
        assert!(matches!(
            channel_statistics(&[1.0], 0),
            Err(FeatureError::ZeroSegmentLength)
        ));
    }

    #[test]
    fn statistics_ignore_coefficient_order() {
        // Equal up to summation rounding, not bit-for-bit.
        let a = channel_statistics(&[0.3, -1.7, 2.2, 0.0, 5.1], 16).unwrap();
        let b = channel_statistics(&[5.1, 0.0, -1.7, 2.2, 0.3], 16).unwrap();
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn statistics_scale_predictably() {
        let base: Vec<f64> = vec![0.4, -2.0, 1.1, 0.9];
        let scaled: Vec<f64> = base.iter().map(|v| v * 3.0).collect();
        let s0 = channel_statistics(&base, 8).unwrap();
        let s1 = channel_statistics(&scaled, 8).unwrap();
        assert!(close(s1.abs_max, 3.0 * s0.abs_max));
        assert!(close(s1.mean_abs, 3.0 * s0.mean_abs));
        assert!(close(s1.std_dev, 3.0 * s0.std_dev));
        assert!(close(s1.avg_power, 9.0 * s0.avg_power));
        assert!(close(s1.avg_energy, 9.0 * s0.avg_energy));
    }

    #[test]
    fn vector_length_is_five_per_channel() {
        let data: Vec<Vec<f64>> = (0..4)
            .map(|c| (0..64).map(|i| ((i + c) as f64 * 0.7).sin()).collect())
            .collect();
        let seg = segment_of(data, 256.0);
        let v = segment_features(
            &seg,
            &WaveletFilterPair::db4(),
            3,
            ExtensionMode::Symmetric,
            BandPolicy::All,
        )
        .unwrap();
        assert_eq!(v.values.len(), 20);
        assert_eq!(v.channel_order, Channel::ALL.to_vec());
    }

    #[test]
    fn constant_segment_has_zero_theta_statistics() {
        // d5 covers (4, 8] Hz at 256 Hz; a constant signal has no detail
        // energy anywhere.
        let seg = segment_of(vec![vec![2.5; 64]], 256.0);
        let v = segment_features(
            &seg,
            &WaveletFilterPair::haar(),
            5,
            ExtensionMode::Periodic,
            BandPolicy::Theta,
        )
        .unwrap();
        assert_eq!(v.values.len(), 5);
        for value in &v.values {
            assert!(value.abs() < 1e-12, "{:?}", v.values);
        }
    }

    #[test]
    fn theta_policy_needs_a_theta_labeled_set() {
        // Three levels at 256 Hz stop at (16, 32]; nothing covers theta.
        let seg = segment_of(vec![(0..64).map(|i| i as f64).collect()], 256.0);
        match segment_features(
            &seg,
            &WaveletFilterPair::haar(),
            3,
            ExtensionMode::Periodic,
            BandPolicy::Theta,
        ) {
            Err(FeatureError::NoThetaSubband { levels: 3, .. }) => {}
            other => panic!("expected NoThetaSubband, got {other:?}"),
        }
    }

    #[test]
    fn channel_blocks_follow_channel_order() {
        // First channel silent, second loud: the first five values are
        // zero, the next five are not.
        let quiet = vec![0.0; 64];
        let loud: Vec<f64> = (0..64).map(|i| (i as f64 * 0.9).sin() * 10.0).collect();
        let seg = segment_of(vec![quiet, loud], 256.0);
        let v = segment_features(
            &seg,
            &WaveletFilterPair::haar(),
            2,
            ExtensionMode::Periodic,
            BandPolicy::All,
        )
        .unwrap();
        assert!(v.values[..5].iter().all(|x| x.abs() < 1e-12));
        assert!(v.values[5..].iter().any(|x| x.abs() > 1.0));
    }

    fn vector(values: Vec<f64>, label: EmotionLabel) -> FeatureVector {
        FeatureVector {
            values,
            label,
            channel_order: vec![Channel::TP9],
        }
    }

    #[test]
    fn standardized_train_has_zero_mean_unit_std() {
        let train: Vec<FeatureVector> = (0..40)
            .map(|i| {
                let x = i as f64;
                vector(vec![3.0 * x + 1.0, -x * x, 7.0], EmotionLabel::Positive)
            })
            .collect();
        let (train_z, _, params) = standardize(&train, &[]).unwrap();

        // Independent re-computation of the first two column moments.
        for dim in 0..2 {
            let n = train_z.len() as f64;
            let mean: f64 = train_z.iter().map(|v| v.values[dim]).sum::<f64>() / n;
            let var: f64 =
                train_z.iter().map(|v| (v.values[dim] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-10, "dim {dim} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-10, "dim {dim} std {}", var.sqrt());
        }
        // The constant column is untouched.
        assert_eq!(params.std_devs[2], 0.0);
        assert!(train_z.iter().all(|v| v.values[2] == 7.0));
    }

    #[test]
    fn test_set_uses_train_moments() {
        let train = vec![
            vector(vec![0.0], EmotionLabel::Positive),
            vector(vec![2.0], EmotionLabel::Negative),
        ];
        let test = vec![vector(vec![4.0], EmotionLabel::Neutral)];
        let (_, test_z, params) = standardize(&train, &test).unwrap();
        // mean 1, population std 1 -> 4 maps to 3.
        assert_eq!(params.means, vec![1.0]);
        assert_eq!(params.std_devs, vec![1.0]);
        assert_eq!(test_z[0].values, vec![3.0]);
    }

    #[test]
    fn standardize_rejects_empty_or_ragged_input() {
        assert!(matches!(
            standardize(&[], &[]),
            Err(FeatureError::EmptyDataset)
        ));
        let train = vec![vector(vec![1.0, 2.0], EmotionLabel::Positive)];
        let test = vec![vector(vec![1.0], EmotionLabel::Positive)];
        assert!(matches!(
            standardize(&train, &test),
            Err(FeatureError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn dataset_requires_consistent_dimensions() {
        let good = LabeledDataset::from_vectors(vec![
            vector(vec![1.0, 2.0], EmotionLabel::Positive),
            vector(vec![3.0, 4.0], EmotionLabel::Negative),
        ])
        .unwrap();
        assert_eq!(good.class_count, 3);
        assert_eq!(good.dimension(), 2);

        assert!(LabeledDataset::from_vectors(vec![]).is_err());
        assert!(LabeledDataset::from_vectors(vec![
            vector(vec![1.0, 2.0], EmotionLabel::Positive),
            vector(vec![3.0], EmotionLabel::Negative),
        ])
        .is_err());
    }
}
