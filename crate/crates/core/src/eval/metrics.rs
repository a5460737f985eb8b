use serde::{Deserialize, Serialize};

use crate::data::{is_benign, LabeledRecord};
use crate::ensemble::Prediction;
use crate::error::{Error, Result};

/// `tp / (tp + fp)`, 0 when undefined.
pub fn precision(tp: usize, fp: usize) -> f64 {
    ratio(tp, tp + fp)
}

/// `tp / (tp + fn)`, 0 when undefined.
pub fn recall(tp: usize, fn_: usize) -> f64 {
    ratio(tp, tp + fn_)
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of held-out-class predictions that are [`Prediction::Unknown`].
pub fn zero_day_detection_rate(predictions: &[Prediction]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    Ok(ratio(predictions.iter().filter(|p| p.is_unknown()).count(), predictions.len()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// Test-set outcome counts. The N-day table covers known-attack records only;
/// zero-day and benign records are tallied separately.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub classes: Vec<String>,
    pub per_class: Vec<ClassCounts>,
    pub known_total: usize,
    pub known_correct: usize,
    pub zero_day_unknown: usize,
    pub zero_day_known: usize,
    pub benign_unknown: usize,
    pub benign_known: usize,
}

impl ConfusionCounts {
    /// `classes[i]` must be the name of ensemble entry `i`.
    pub fn tally(
        classes: &[String],
        zero_day: Option<&str>,
        records: &[LabeledRecord],
        predictions: &[Prediction],
    ) -> Self {
        let k = classes.len();
        let mut c = ConfusionCounts {
            classes: classes.to_vec(),
            per_class: vec![ClassCounts::default(); k],
            ..Default::default()
        };
        for (r, p) in records.iter().zip(predictions) {
            if is_benign(&r.label) {
                if p.is_unknown() {
                    c.benign_unknown += 1;
                } else {
                    c.benign_known += 1;
                }
                continue;
            }
            if Some(r.label.as_str()) == zero_day {
                if p.is_unknown() {
                    c.zero_day_unknown += 1;
                } else {
                    c.zero_day_known += 1;
                }
                continue;
            }
            let Some(truth) = classes.iter().position(|n| *n == r.label) else {
                continue;
            };
            c.known_total += 1;
            let predicted = p.class_index();
            if predicted == Some(truth) {
                c.known_correct += 1;
            }
            for (i, counts) in c.per_class.iter_mut().enumerate() {
                match (truth == i, predicted == Some(i)) {
                    (true, true) => counts.tp += 1,
                    (true, false) => counts.fn_ += 1,
                    (false, true) => counts.fp += 1,
                    (false, false) => counts.tn += 1,
                }
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.known_total + self.zero_day_known + self.zero_day_unknown + self.benign_known + self.benign_unknown
    }

    pub fn report(&self) -> MetricsReport {
        let per_class: Vec<ClassMetrics> = self
            .classes
            .iter()
            .zip(&self.per_class)
            .map(|(name, c)| {
                let p = precision(c.tp, c.fp);
                let r = recall(c.tp, c.fn_);
                ClassMetrics { class: name.clone(), precision: p, recall: r, f1: f1(p, r), support: c.tp + c.fn_ }
            })
            .collect();
        let k = per_class.len().max(1) as f64;
        MetricsReport {
            macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
            macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
            macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
            accuracy: ratio(self.known_correct, self.known_total),
            zero_day_detection_rate: ratio(self.zero_day_unknown, self.zero_day_unknown + self.zero_day_known),
            benign_rejection_rate: ratio(self.benign_unknown, self.benign_unknown + self.benign_known),
            zero_day_support: self.zero_day_unknown + self.zero_day_known,
            benign_support: self.benign_unknown + self.benign_known,
            per_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Known-attack test records assigned their own class.
    pub accuracy: f64,
    pub zero_day_detection_rate: f64,
    pub benign_rejection_rate: f64,
    pub zero_day_support: usize,
    pub benign_support: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::ClassId;
    use crate::iforest::FeatureVector;
    use proptest::prelude::*;

    #[test]
    fn formulas() {
        assert_eq!(precision(3, 1), 0.75);
        assert_eq!(recall(0, 0), 0.0);
        assert_eq!(precision(0, 0), 0.0);
        assert!((f1(1.0, 0.5) - 0.6667).abs() < 1e-4);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    fn known(i: usize) -> Prediction {
        Prediction::Known { class: ClassId { name: format!("c{i}"), index: i }, score: 0.4 }
    }

    #[test]
    fn zero_day_rate() {
        let mut p = vec![Prediction::Unknown; 8];
        p.extend([known(0), known(1)]);
        assert_eq!(zero_day_detection_rate(&p).unwrap(), 0.8);
        assert_eq!(zero_day_detection_rate(&[known(0), known(0)]).unwrap(), 0.0);
        assert_eq!(zero_day_detection_rate(&[Prediction::Unknown]).unwrap(), 1.0);
        assert!(matches!(zero_day_detection_rate(&[]), Err(Error::EmptyTestSet)));
    }

    fn rec(label: &str) -> LabeledRecord {
        LabeledRecord { id: 0, features: FeatureVector::new(vec![0.0]).unwrap(), label: label.into() }
    }

    #[test]
    fn tally_scopes() {
        let classes = vec!["c0".to_string(), "c1".to_string()];
        let records = vec![rec("c0"), rec("c0"), rec("c1"), rec("zd"), rec("zd"), rec("benign"), rec("benign")];
        let preds =
            vec![known(0), Prediction::Unknown, known(0), Prediction::Unknown, known(1), Prediction::Unknown, known(0)];
        let c = ConfusionCounts::tally(&classes, Some("zd"), &records, &preds);
        assert_eq!(c.total(), records.len());
        assert_eq!(c.per_class[0], ClassCounts { tp: 1, fp: 1, fn_: 1, tn: 0 });
        assert_eq!(c.per_class[1], ClassCounts { tp: 0, fp: 0, fn_: 1, tn: 2 });
        let m = c.report();
        assert_eq!(m.zero_day_detection_rate, 0.5);
        assert_eq!(m.benign_rejection_rate, 0.5);
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.per_class[0].precision, 0.5);
        assert_eq!(m.per_class[1].f1, 0.0);
    }

    proptest! {
        #[test]
        fn metric_bounds(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let p = precision(tp, fp);
            let r = recall(tp, fn_);
            let f = f1(p, r);
            prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&f));
            prop_assert!(f <= p.max(r) + 1e-15);
        }

        #[test]
        fn per_class_support(labels in prop::collection::vec(0usize..3, 1..60), preds in prop::collection::vec(0usize..4, 60)) {
            let classes: Vec<String> = (0..3).map(|i| format!("c{i}")).collect();
            let records: Vec<LabeledRecord> = labels.iter().map(|&l| rec(&classes[l])).collect();
            let predictions: Vec<Prediction> = preds[..labels.len()].iter().map(|&p| if p == 3 { Prediction::Unknown } else { known(p) }).collect();
            let c = ConfusionCounts::tally(&classes, None, &records, &predictions);
            for (i, counts) in c.per_class.iter().enumerate() {
                prop_assert_eq!(counts.tp + counts.fn_, labels.iter().filter(|&&l| l == i).count());
                prop_assert_eq!(counts.tp + counts.fp + counts.fn_ + counts.tn, labels.len());
            }
        }
    }
}
