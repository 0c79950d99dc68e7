use crate::error::{bail, Result};

/// Verification decision: accept as the same person when `d ≤ tau`.
pub fn decide(d: f64, tau: f64) -> bool {
    d <= tau
}

/// Pair outcome counts with "same person" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(decisions: &[bool], truths: &[bool]) -> Result<ConfusionCounts> {
    if decisions.len() != truths.len() {
        bail!(
            Contract,
            "{} decisions for {} ground-truth labels",
            decisions.len(),
            truths.len()
        );
    }
    let mut c = ConfusionCounts::default();
    for (&d, &t) in decisions.iter().zip(truths) {
        match (d, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Accuracy, precision, recall and F1. Ratios with a zero denominator are 0.
pub fn compute_metrics(c: &ConfusionCounts) -> Result<Metrics> {
    if c.total() == 0 {
        bail!(Contract, "metrics need at least one evaluated pair");
    }
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    Ok(Metrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn decide_examples() {
        assert!(decide(0.3, 0.5));
        assert!(decide(0.5, 0.5));
        assert!(!decide(0.9, 0.5));
        assert!(decide(1e300, f64::INFINITY));
    }

    #[test]
    fn confusion_examples() {
        let truths: Vec<bool> = (0..20).map(|i| i < 10).collect();
        let c = confusion(&truths, &truths).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 10, fp: 0, tn: 10, fn_: 0 });

        let half: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let c = confusion(&[true; 10], &half).unwrap();
        assert_eq!((c.tp, c.fp), (5, 5));

        assert_eq!(confusion(&[], &[]).unwrap(), ConfusionCounts::default());
        assert!(matches!(confusion(&[true], &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn metric_examples() {
        let m = compute_metrics(&ConfusionCounts { tp: 40, fp: 10, tn: 40, fn_: 10 }).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            assert!((v - 0.8).abs() < 1e-15);
        }
        let m = compute_metrics(&ConfusionCounts { tp: 50, fp: 0, tn: 50, fn_: 0 }).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(compute_metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn zero_denominators() {
        let m = compute_metrics(&ConfusionCounts { tp: 0, fp: 0, tn: 5, fn_: 5 }).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn f1_from_reported_precision_recall() {
        assert!((f1_score(0.7761, 0.7899) - 0.7829).abs() < 1e-4);
    }
}
