//! Patient-level lesion-presence classification.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `None` when there are no lesion-positive cases.
    pub sensitivity: Option<f64>,
    /// `None` when there are no lesion-negative cases.
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

impl ClassificationSummary {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            tp,
            tn,
            fp,
            fn_,
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
        }
    }
}

/// Summarizes `(reference_empty, prediction_empty)` flags per case. A case is
/// positive when its reference has lesions and predicted positive when the
/// prediction is non-empty.
pub fn classification_summary(cases: impl IntoIterator<Item = (bool, bool)>) -> ClassificationSummary {
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (reference_empty, prediction_empty) in cases {
        match (reference_empty, prediction_empty) {
            (false, false) => tp += 1,
            (false, true) => fn_ += 1,
            (true, false) => fp += 1,
            (true, true) => tn += 1,
        }
    }
    ClassificationSummary::from_counts(tp, tn, fp, fn_)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(tp: usize, pos: usize, tn: usize, neg: usize) -> Vec<(bool, bool)> {
        let mut v = Vec::new();
        v.extend((0..pos).map(|i| (false, i >= tp)));
        v.extend((0..neg).map(|i| (true, i < tn)));
        v
    }

    #[test]
    fn first_reported_operating_point() {
        let s = classification_summary(flags(152, 156, 12, 44));
        assert_eq!((s.tp, s.tn, s.fp, s.fn_), (152, 12, 32, 4));
        assert!((s.sensitivity.unwrap() - 152.0 / 156.0).abs() < 1e-15);
        assert!((s.specificity.unwrap() - 12.0 / 44.0).abs() < 1e-15);
        assert!((s.accuracy.unwrap() - 0.82).abs() < 1e-12);
    }

    #[test]
    fn all_predictions_empty() {
        let s = classification_summary(flags(0, 10, 7, 7));
        assert_eq!((s.tp, s.tn), (0, 7));
        assert_eq!(s.sensitivity, Some(0.0));
        assert_eq!(s.specificity, Some(1.0));
    }

    #[test]
    fn undefined_rates() {
        let s = classification_summary(flags(3, 3, 0, 0));
        assert_eq!(s.specificity, None);
        assert_eq!(s.sensitivity, Some(1.0));
    }
}
