//! k-nearest-neighbor classification under the Minkowski metric.
//!
//! Search is exhaustive: training sets here are a few hundred vectors, so
//! a scan is faster in practice than tree structures and has no tie-
//! handling ambiguity. Every tie has a written rule (see [`KnnModel::classify`]),
//! which keeps results identical across platforms and input orderings.

use serde::{Deserialize, Serialize};

use crate::features::LabeledDataset;
use crate::signal_io::EmotionLabel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum KnnError {
    #[error("model has no training vectors")]
    EmptyModel,
    #[error("k = {k} is outside 1..={train_size}")]
    KOutOfRange { k: usize, train_size: usize },
    #[error("Minkowski exponent must be a finite number >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("query has {found} dimension(s), model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{have} sample(s) cannot be split into {need} non-empty folds")]
    TooFewSamples { have: usize, need: usize },
    #[error("no candidate k values given")]
    NoCandidates,
    #[error("candidate k = {k} exceeds the smallest fold training size {limit}")]
    CandidateTooLarge { k: usize, limit: usize },
}

/// Minkowski distance of order `c`: (sum |x_i - y_i|^c)^(1/c).
///
/// The absolute value matters for every odd or fractional order; without
/// it the sum could go negative and the root would be undefined.
pub fn minkowski_distance(x: &[f64], y: &[f64], c: f64) -> Result<f64, KnnError> {
    if x.len() != y.len() {
        return Err(KnnError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if !c.is_finite() || c < 1.0 {
        return Err(KnnError::InvalidExponent(c));
    }
    let sum: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs().powf(c))
        .sum();
    Ok(sum.powf(1.0 / c))
}

/// A trained (memorized) classifier: the training set plus k and the
/// metric order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub train: LabeledDataset,
    pub k: usize,
    pub minkowski_c: f64,
}

impl KnnModel {
    pub fn new(train: LabeledDataset, k: usize, minkowski_c: f64) -> Result<Self, KnnError> {
        if train.is_empty() {
            return Err(KnnError::EmptyModel);
        }
        if k == 0 || k > train.len() {
            return Err(KnnError::KOutOfRange {
                k,
                train_size: train.len(),
            });
        }
        if !minkowski_c.is_finite() || minkowski_c < 1.0 {
            return Err(KnnError::InvalidExponent(minkowski_c));
        }
        Ok(KnnModel {
            train,
            k,
            minkowski_c,
        })
    }

    /// Predicts a label and returns the k training indices that voted,
    /// ordered nearest first.
    ///
    /// Tie rules, applied in order:
    /// - equal distances at the k-th place: the lower training index is
    ///   kept (the sort key is (distance, index));
    /// - equal vote counts: the class whose voters sit at the smaller
    ///   summed distance wins;
    /// - still equal: the smaller class index wins.
    pub fn classify(&self, query: &[f64]) -> Result<(EmotionLabel, Vec<usize>), KnnError> {
        let dim = self.train.dimension();
        if query.len() != dim {
            return Err(KnnError::DimensionMismatch {
                expected: dim,
                found: query.len(),
            });
        }

        let mut ranked: Vec<(f64, usize)> = self
            .train
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = minkowski_distance(query, &v.values, self.minkowski_c)?;
                Ok((d, i))
            })
            .collect::<Result<_, KnnError>>()?;
        ranked.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.truncate(self.k);

        let mut counts = [0usize; 3];
        let mut summed = [0.0f64; 3];
        for (d, i) in &ranked {
            let class = self.train.vectors[*i].label.index();
            counts[class] += 1;
            summed[class] += d;
        }
        let top = *counts.iter().max().unwrap();
        let mut winner = usize::MAX;
        for class in 0..3 {
            if counts[class] == top && (winner == usize::MAX || summed[class] < summed[winner]) {
                winner = class;
            }
        }

        Ok((
            EmotionLabel::from_index(winner).unwrap(),
            ranked.into_iter().map(|(_, i)| i).collect(),
        ))
    }
}

/// Stratified k-fold assignment: within each class the (seed-shuffled)
/// members are dealt round-robin, so fold class proportions differ from
/// the dataset's by at most one member.
pub fn fold_assignment(labels: &[EmotionLabel], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    // Offset successive classes so small classes do not pile onto fold 0.
    let mut next_fold = 0usize;
    for class in EmotionLabel::ALL {
        let mut members: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i] == class)
            .collect();
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next_fold;
            next_fold = (next_fold + 1) % folds;
        }
    }
    assignment
}

/// Picks k by cross-validated accuracy.
///
/// Returns the winning k and every candidate's mean accuracy across the
/// folds (in candidate order). Accuracy ties go to the smaller k, so a
/// run with `candidates = [1, 3, 5]` on an easy dataset returns 1.
pub fn select_k(
    data: &LabeledDataset,
    candidates: &[usize],
    minkowski_c: f64,
    folds: usize,
    seed: u64,
) -> Result<(usize, Vec<(usize, f64)>), KnnError> {
    if candidates.is_empty() {
        return Err(KnnError::NoCandidates);
    }
    if folds < 2 || data.len() < folds {
        return Err(KnnError::TooFewSamples {
            have: data.len(),
            need: folds.max(2),
        });
    }
    let labels: Vec<EmotionLabel> = data.vectors.iter().map(|v| v.label).collect();
    let assignment = fold_assignment(&labels, folds, seed);
    let fold_sizes: Vec<usize> = (0..folds)
        .map(|f| assignment.iter().filter(|&&a| a == f).count())
        .collect();
    if fold_sizes.iter().any(|&s| s == 0) {
        return Err(KnnError::TooFewSamples {
            have: data.len(),
            need: folds,
        });
    }
    let smallest_train = data.len() - fold_sizes.iter().max().unwrap();
    for &k in candidates {
        if k == 0 {
            return Err(KnnError::KOutOfRange {
                k,
                train_size: smallest_train,
            });
        }
        if k > smallest_train {
            return Err(KnnError::CandidateTooLarge {
                k,
                limit: smallest_train,
            });
        }
    }

    let mut per_candidate = Vec::with_capacity(candidates.len());
    for &k in candidates {
        let mut fold_accuracies = Vec::with_capacity(folds);
        for fold in 0..folds {
            let train_vectors: Vec<_> = data
                .vectors
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a != fold)
                .map(|(v, _)| v.clone())
                .collect();
            let model = KnnModel::new(
                LabeledDataset::from_vectors(train_vectors).expect("non-empty fold train"),
                k,
                minkowski_c,
            )?;
            let mut correct = 0usize;
            let mut total = 0usize;
            for (v, &a) in data.vectors.iter().zip(&assignment) {
                if a != fold {
                    continue;
                }
                let (label, _) = model.classify(&v.values)?;
                correct += usize::from(label == v.label);
                total += 1;
            }
            fold_accuracies.push(correct as f64 / total as f64);
        }
        let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
        per_candidate.push((k, mean));
    }

    let mut best = per_candidate[0];
    for &(k, acc) in &per_candidate[1..] {
        if acc > best.1 || (acc == best.1 && k < best.0) {
            best = (k, acc);
        }
    }
    Ok((best.0, per_candidate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::signal_io::Channel;

    fn vector(values: Vec<f64>, label: EmotionLabel) -> FeatureVector {
        FeatureVector {
            values,
            label,
            channel_order: vec![Channel::TP9],
        }
    }

    fn dataset(points: Vec<(Vec<f64>, EmotionLabel)>) -> LabeledDataset {
        LabeledDataset::from_vectors(
            points.into_iter().map(|(v, l)| vector(v, l)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn minkowski_hand_values() {
        let x = [1.0, 2.0, 3.0];
        let y = [4.0, 5.0, 6.0];
        assert!((minkowski_distance(&x, &y, 1.0).unwrap() - 9.0).abs() < 1e-12);
        assert!((minkowski_distance(&x, &y, 2.0).unwrap() - 27f64.sqrt()).abs() < 1e-12);
        assert!((minkowski_distance(&x, &y, 3.0).unwrap() - 81f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn negative_differences_need_the_absolute_value() {
        // Without |.|, the order-1 sum would be 3 + (-4) = -1.
        let x = [0.0, 0.0];
        let y = [3.0, -4.0];
        assert!((minkowski_distance(&x, &y, 1.0).unwrap() - 7.0).abs() < 1e-12);
        assert!((minkowski_distance(&x, &y, 2.0).unwrap() - 5.0).abs() < 1e-12);
        let d3 = minkowski_distance(&x, &y, 3.0).unwrap();
        assert!((d3 - 91f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn distance_is_zero_only_at_identity_and_symmetric() {
        let x = [0.2, -1.4, 3.3];
        let y = [1.0, 0.0, -2.0];
        assert_eq!(minkowski_distance(&x, &x, 2.0).unwrap(), 0.0);
        assert_eq!(
            minkowski_distance(&x, &y, 1.5).unwrap(),
            minkowski_distance(&y, &x, 1.5).unwrap()
        );
    }

    #[test]
    fn invalid_metric_arguments_are_rejected() {
        assert!(matches!(
            minkowski_distance(&[1.0], &[1.0, 2.0], 2.0),
            Err(KnnError::DimensionMismatch { .. })
        ));
        for bad in [0.5, 0.0, -2.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                minkowski_distance(&[1.0], &[2.0], bad),
                Err(KnnError::InvalidExponent(_))
            ));
        }
    }

    /// Five points checked against a by-hand ranking.
    fn five_points() -> LabeledDataset {
        dataset(vec![
            (vec![0.0, 0.0], EmotionLabel::Positive),  // 0: d = 0.5
            (vec![1.0, 0.0], EmotionLabel::Positive),  // 1: d = 0.5
            (vec![0.9, 0.1], EmotionLabel::Neutral),   // 2: d = sqrt(0.17) ~ 0.412
            (vec![5.0, 5.0], EmotionLabel::Negative),  // 3: far
            (vec![5.1, 5.0], EmotionLabel::Negative),  // 4: far
        ])
    }

    #[test]
    fn three_neighbors_outvote_the_single_nearest() {
        let model = KnnModel::new(five_points(), 3, 2.0).unwrap();
        let (label, neighbors) = model.classify(&[0.5, 0.0]).unwrap();
        assert_eq!(label, EmotionLabel::Positive);
        // Nearest is index 2; indices 0 and 1 tie at 0.5 and keep index order.
        assert_eq!(neighbors, vec![2, 0, 1]);
    }

    #[test]
    fn one_neighbor_follows_the_nearest_point() {
        let model = KnnModel::new(five_points(), 1, 2.0).unwrap();
        let (label, neighbors) = model.classify(&[0.5, 0.0]).unwrap();
        assert_eq!(label, EmotionLabel::Neutral);
        assert_eq!(neighbors, vec![2]);
    }

    #[test]
    fn vote_ties_go_to_the_closer_class() {
        // One voter each; Neutral sits closer, so it wins even though
        // Positive has the smaller class index.
        let data = dataset(vec![
            (vec![0.5, 0.0], EmotionLabel::Positive),
            (vec![-0.4, 0.0], EmotionLabel::Neutral),
        ]);
        let model = KnnModel::new(data, 2, 2.0).unwrap();
        let (label, _) = model.classify(&[0.0, 0.0]).unwrap();
        assert_eq!(label, EmotionLabel::Neutral);
    }

    #[test]
    fn fully_tied_votes_go_to_the_smaller_class_index() {
        let data = dataset(vec![
            (vec![0.5, 0.0], EmotionLabel::Negative),
            (vec![-0.5, 0.0], EmotionLabel::Neutral),
        ]);
        let model = KnnModel::new(data, 2, 2.0).unwrap();
        let (label, _) = model.classify(&[0.0, 0.0]).unwrap();
        assert_eq!(label, EmotionLabel::Neutral);
    }

    #[test]
    fn boundary_distance_ties_keep_lower_training_indices() {
        let data = dataset(vec![
            (vec![1.0, 0.0], EmotionLabel::Positive),
            (vec![-1.0, 0.0], EmotionLabel::Neutral),
            (vec![0.0, 1.0], EmotionLabel::Negative),
        ]);
        let model = KnnModel::new(data, 2, 2.0).unwrap();
        let (label, neighbors) = model.classify(&[0.0, 0.0]).unwrap();
        assert_eq!(neighbors, vec![0, 1]);
        // 1-1 vote, equal sums, class index decides.
        assert_eq!(label, EmotionLabel::Positive);
    }

    #[test]
    fn model_construction_checks_its_preconditions() {
        assert!(matches!(
            KnnModel::new(five_points(), 0, 2.0),
            Err(KnnError::KOutOfRange { .. })
        ));
        assert!(matches!(
            KnnModel::new(five_points(), 6, 2.0),
            Err(KnnError::KOutOfRange { k: 6, train_size: 5 })
        ));
        assert!(matches!(
            KnnModel::new(five_points(), 1, 0.9),
            Err(KnnError::InvalidExponent(_))
        ));
    }

    #[test]
    fn classify_rejects_mismatched_queries() {
        let model = KnnModel::new(five_points(), 1, 2.0).unwrap();
        assert!(matches!(
            model.classify(&[1.0, 2.0, 3.0]),
            Err(KnnError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    /// Three tight clusters, twelve points per class.
    fn clustered(jitter: f64) -> LabeledDataset {
        let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
        let mut points = Vec::new();
        for (class, (cx, cy)) in centers.iter().enumerate() {
            for i in 0..12 {
                let dx = jitter * ((i * 7 % 5) as f64 - 2.0);
                let dy = jitter * ((i * 3 % 5) as f64 - 2.0);
                points.push((
                    vec![cx + dx, cy + dy],
                    EmotionLabel::from_index(class).unwrap(),
                ));
            }
        }
        dataset(points)
    }

    #[test]
    fn selection_prefers_the_smallest_k_on_ties() {
        // Well-separated clusters: every candidate scores 1.0, so the
        // smallest k must be returned.
        let data = clustered(0.1);
        let (best, scores) = select_k(&data, &[1, 3, 5], 2.0, 5, 42).unwrap();
        assert_eq!(best, 1);
        for (_, acc) in &scores {
            assert_eq!(*acc, 1.0);
        }
    }

    #[test]
    fn selection_is_deterministic_per_seed() {
        let data = clustered(1.9);
        let a = select_k(&data, &[1, 3, 5, 7], 2.0, 5, 7).unwrap();
        let b = select_k(&data, &[1, 3, 5, 7], 2.0, 5, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn folds_are_stratified_within_one_member() {
        let data = clustered(0.5);
        let labels: Vec<EmotionLabel> = data.vectors.iter().map(|v| v.label).collect();
        let assignment = fold_assignment(&labels, 5, 11);
        for fold in 0..5 {
            for class in 0..3 {
                let count = data
                    .vectors
                    .iter()
                    .zip(&assignment)
                    .filter(|(v, &a)| a == fold && v.label.index() == class)
                    .count();
                // 12 members over 5 folds: every fold sees 2 or 3.
                assert!((2..=3).contains(&count), "fold {fold} class {class}: {count}");
            }
        }
    }

    #[test]
    fn selection_rejects_degenerate_setups() {
        let data = clustered(0.1);
        assert!(matches!(
            select_k(&data, &[], 2.0, 5, 0),
            Err(KnnError::NoCandidates)
        ));
        assert!(matches!(
            select_k(&data, &[1], 2.0, 1, 0),
            Err(KnnError::TooFewSamples { .. })
        ));
        assert!(matches!(
            select_k(&data, &[35], 2.0, 5, 0),
            Err(KnnError::CandidateTooLarge { .. })
        ));
        let tiny = dataset(vec![
            (vec![0.0], EmotionLabel::Positive),
            (vec![1.0], EmotionLabel::Neutral),
        ]);
        assert!(matches!(
            select_k(&tiny, &[1], 2.0, 5, 0),
            Err(KnnError::TooFewSamples { have: 2, need: 5 })
        ));
    }
}
