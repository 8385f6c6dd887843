//! Confusion matrices and the derived evaluation report.
//!
//! Rates follow the project's reporting convention, which differs from
//! textbook usage. With a class binarized one-vs-rest (tp, fp, tn, fn):
//!
//!   accuracy    = (tn + tp) / (tp + fp + tn + fn)
//!   specificity = tp / (tp + fp)     (elsewhere called precision)
//!   sensitivity = tn / (tn + fn)     (elsewhere called negative predictive value)
//!   recall      = tp / (tp + fn)     (the textbook meaning)
//!
//! Each rate carries a `degenerate` flag instead of dividing by zero.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::signal_io::EmotionLabel;

const CLASSES: usize = 3;

/// Class counts, rows indexed by true label, columns by predicted label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; CLASSES]; CLASSES],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, truth: EmotionLabel, predicted: EmotionLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (EmotionLabel, EmotionLabel)>) -> Self {
        let mut cm = Self::new();
        for (truth, predicted) in pairs {
            cm.record(truth, predicted);
        }
        cm
    }

    /// Cell-wise sum, used to pool folds.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for r in 0..CLASSES {
            for c in 0..CLASSES {
                self.counts[r][c] += other.counts[r][c];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Number of samples whose true label is `class`.
    pub fn support(&self, class: EmotionLabel) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    /// One-vs-rest collapse for `class`.
    pub fn binarize(&self, class: EmotionLabel) -> BinaryTally {
        let p = class.index();
        let tp = self.counts[p][p];
        let row: u64 = self.counts[p].iter().sum();
        let col: u64 = (0..CLASSES).map(|r| self.counts[r][p]).sum();
        BinaryTally {
            true_positives: tp,
            false_negatives: row - tp,
            false_positives: col - tp,
            true_negatives: self.total() + tp - row - col,
        }
    }

    /// CSV rendering: one header row, then one row per true label.
    pub fn csv_string(&self) -> String {
        let mut out = String::from("true_label");
        for label in EmotionLabel::ALL {
            out.push_str(",predicted_");
            out.push_str(label.name());
        }
        out.push('\n');
        for truth in EmotionLabel::ALL {
            out.push_str(truth.name());
            for c in 0..CLASSES {
                out.push(',');
                out.push_str(&self.counts[truth.index()][c].to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryTally {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

/// A ratio that remembers whether its denominator was zero. Degenerate
/// rates hold 0.0 and are flagged rather than being NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub degenerate: bool,
}

impl Rate {
    fn of(numerator: u64, denominator: u64) -> Self {
        if denominator == 0 {
            Rate { value: 0.0, degenerate: true }
        } else {
            Rate {
                value: numerator as f64 / denominator as f64,
                degenerate: false,
            }
        }
    }
}

impl BinaryTally {
    fn total(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    pub fn accuracy(&self) -> Rate {
        Rate::of(self.true_negatives + self.true_positives, self.total())
    }

    pub fn specificity(&self) -> Rate {
        Rate::of(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn sensitivity(&self) -> Rate {
        Rate::of(self.true_negatives, self.true_negatives + self.false_negatives)
    }

    pub fn recall(&self) -> Rate {
        Rate::of(self.true_positives, self.true_positives + self.false_negatives)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: EmotionLabel,
    pub support: u64,
    pub accuracy: Rate,
    pub specificity: Rate,
    pub sensitivity: Rate,
    pub recall: Rate,
}

/// Full report for one classifier run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Trace over total, the plain multiclass hit rate.
    pub overall_accuracy: Rate,
    /// Macro averages: plain means of the per-class values, with
    /// degenerate rates contributing their stored 0.0.
    pub macro_accuracy: f64,
    pub macro_specificity: f64,
    pub macro_sensitivity: f64,
    pub macro_recall: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let trace: u64 = (0..CLASSES).map(|i| confusion.counts[i][i]).sum();
        let per_class: Vec<ClassMetrics> = EmotionLabel::ALL
            .iter()
            .map(|&label| {
                let tally = confusion.binarize(label);
                ClassMetrics {
                    label,
                    support: confusion.support(label),
                    accuracy: tally.accuracy(),
                    specificity: tally.specificity(),
                    sensitivity: tally.sensitivity(),
                    recall: tally.recall(),
                }
            })
            .collect();
        let mean = |f: fn(&ClassMetrics) -> f64| {
            per_class.iter().map(f).sum::<f64>() / CLASSES as f64
        };
        EvalReport {
            overall_accuracy: Rate::of(trace, confusion.total()),
            macro_accuracy: mean(|c| c.accuracy.value),
            macro_specificity: mean(|c| c.specificity.value),
            macro_sensitivity: mean(|c| c.sensitivity.value),
            macro_recall: mean(|c| c.recall.value),
            per_class,
            confusion,
        }
    }
}

fn fmt_rate(r: Rate) -> String {
    if r.degenerate {
        "   n/a".to_string()
    } else {
        format!("{:.4}", r.value)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "overall accuracy: {} ({} samples)",
            fmt_rate(self.overall_accuracy),
            self.confusion.total()
        )?;
        writeln!(
            f,
            "{:<10} {:>8} {:>8} {:>11} {:>11} {:>8}",
            "class", "support", "accuracy", "specificity", "sensitivity", "recall"
        )?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<10} {:>8} {:>8} {:>11} {:>11} {:>8}",
                c.label.name(),
                c.support,
                fmt_rate(c.accuracy),
                fmt_rate(c.specificity),
                fmt_rate(c.sensitivity),
                fmt_rate(c.recall)
            )?;
        }
        write!(
            f,
            "{:<10} {:>8} {:>8.4} {:>11.4} {:>11.4} {:>8.4}",
            "macro", "", self.macro_accuracy, self.macro_specificity,
            self.macro_sensitivity, self.macro_recall
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionLabel::{Negative, Neutral, Positive};

    fn all_ones() -> ConfusionMatrix {
        ConfusionMatrix { counts: [[1; 3]; 3] }
    }

    #[test]
    fn binarize_tallies_an_all_ones_matrix_by_hand() {
        let cm = all_ones();
        for label in EmotionLabel::ALL {
            let t = cm.binarize(label);
            assert_eq!(t.true_positives, 1);
            assert_eq!(t.false_negatives, 2);
            assert_eq!(t.false_positives, 2);
            assert_eq!(t.true_negatives, 4);
        }
    }

    #[test]
    fn rates_on_the_all_ones_matrix() {
        let report = EvalReport::from_confusion(all_ones());
        // Hand tally per class: tp=1 fn=2 fp=2 tn=4.
        for c in &report.per_class {
            assert!((c.accuracy.value - 5.0 / 9.0).abs() < 1e-15);
            assert!((c.specificity.value - 1.0 / 3.0).abs() < 1e-15);
            assert!((c.sensitivity.value - 2.0 / 3.0).abs() < 1e-15);
            assert!((c.recall.value - 1.0 / 3.0).abs() < 1e-15);
            assert_eq!(c.support, 3);
        }
        assert!((report.overall_accuracy.value - 1.0 / 3.0).abs() < 1e-15);
        assert!((report.macro_accuracy - 5.0 / 9.0).abs() < 1e-15);
        assert!((report.macro_specificity - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_diagonal_scores_ones_everywhere() {
        let cm = ConfusionMatrix {
            counts: [[5, 0, 0], [0, 5, 0], [0, 0, 5]],
        };
        let t = cm.binarize(Positive);
        assert_eq!(
            t,
            BinaryTally {
                true_positives: 5,
                false_positives: 0,
                true_negatives: 10,
                false_negatives: 0
            }
        );
        let report = EvalReport::from_confusion(cm);
        assert_eq!(report.overall_accuracy.value, 1.0);
        for c in &report.per_class {
            assert_eq!(c.accuracy.value, 1.0);
            assert_eq!(c.specificity.value, 1.0);
            assert_eq!(c.sensitivity.value, 1.0);
            assert_eq!(c.recall.value, 1.0);
            assert!(!c.accuracy.degenerate);
        }
    }

    #[test]
    fn degenerate_rates_are_flagged_not_nan() {
        // Truth [P, P, Neu, Neg], every prediction Positive.
        let cm = ConfusionMatrix::from_pairs([
            (Positive, Positive),
            (Positive, Positive),
            (Neutral, Positive),
            (Negative, Positive),
        ]);
        assert_eq!(cm.counts, [[2, 0, 0], [1, 0, 0], [1, 0, 0]]);

        let report = EvalReport::from_confusion(cm);
        let p = &report.per_class[0];
        // tp=2 fn=0 fp=2 tn=0.
        assert!((p.accuracy.value - 0.5).abs() < 1e-15);
        assert!((p.specificity.value - 0.5).abs() < 1e-15);
        assert!(p.sensitivity.degenerate, "tn + fn = 0 for the positive class");
        assert_eq!(p.recall.value, 1.0);

        let neu = &report.per_class[1];
        // tp=0 fn=1 fp=0 tn=3.
        assert!((neu.accuracy.value - 0.75).abs() < 1e-15);
        assert!(neu.specificity.degenerate, "tp + fp = 0 when nothing predicts Neutral");
        assert!((neu.sensitivity.value - 0.75).abs() < 1e-15);
        assert_eq!(neu.recall.value, 0.0);
        assert!(!neu.recall.degenerate);

        assert!((report.overall_accuracy.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_matrix_is_fully_degenerate() {
        let report = EvalReport::from_confusion(ConfusionMatrix::new());
        assert!(report.overall_accuracy.degenerate);
        assert_eq!(report.overall_accuracy.value, 0.0);
        for c in &report.per_class {
            assert!(c.accuracy.degenerate);
            assert_eq!(c.support, 0);
        }
    }

    #[test]
    fn merge_sums_cells() {
        let mut a = ConfusionMatrix::from_pairs([(Positive, Neutral)]);
        let b = ConfusionMatrix::from_pairs([(Positive, Neutral), (Negative, Negative)]);
        a.merge(&b);
        assert_eq!(a.counts[0][1], 2);
        assert_eq!(a.counts[2][2], 1);
        assert_eq!(a.total(), 3);
    }

    #[test]
    fn csv_rendering_is_stable() {
        let cm = ConfusionMatrix {
            counts: [[7, 1, 0], [2, 9, 1], [0, 3, 8]],
        };
        let expected = "true_label,predicted_Positive,predicted_Neutral,predicted_Negative\n\
                        Positive,7,1,0\n\
                        Neutral,2,9,1\n\
                        Negative,0,3,8\n";
        assert_eq!(cm.csv_string(), expected);
    }

    #[test]
    fn report_survives_a_json_round_trip() {
        let cm = ConfusionMatrix {
            counts: [[4, 1, 0], [0, 5, 2], [1, 1, 6]],
        };
        let report = EvalReport::from_confusion(cm);
        let text = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn display_lists_every_class_and_the_macro_row() {
        let report = EvalReport::from_confusion(all_ones());
        let text = report.to_string();
        for name in ["Positive", "Neutral", "Negative", "macro", "specificity"] {
            assert!(text.contains(name), "missing {name} in:\n{text}");
        }
    }
}
