use super::metrics::{compute_metrics, confusion, decide};
use crate::error::{bail, Result};

/// Grid size used by [`select_threshold`].
pub const DEFAULT_ROC_THRESHOLDS: usize = 201;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

fn check_inputs(distances: &[f64], truths: &[bool]) -> Result<()> {
    if distances.len() != truths.len() {
        bail!(
            Contract,
            "{} distances for {} ground-truth labels",
            distances.len(),
            truths.len()
        );
    }
    if let Some(d) = distances.iter().find(|d| !d.is_finite()) {
        bail!(Data, "non-finite distance {d}");
    }
    if !truths.contains(&true) || !truths.contains(&false) {
        bail!(Data, "ROC analysis needs both same and different pairs");
    }
    Ok(())
}

/// Candidate thresholds: one just below the smallest distance, then
/// `n_thresholds` evenly spaced values from the smallest to the largest
/// distance inclusive.
pub fn threshold_grid(distances: &[f64], n_thresholds: usize) -> Vec<f64> {
    let lo = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut grid = vec![lo.next_down(), lo];
    let steps = n_thresholds.max(2) - 1;
    for i in 1..steps {
        grid.push(lo + (hi - lo) * i as f64 / steps as f64);
    }
    grid.push(hi);
    grid.dedup();
    grid
}

fn point_at(distances: &[f64], truths: &[bool], threshold: f64) -> RocPoint {
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&d, &t) in distances.iter().zip(truths) {
        if decide(d, threshold) {
            if t {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let pos = truths.iter().filter(|&&t| t).count();
    let neg = truths.len() - pos;
    RocPoint {
        threshold,
        tpr: tp as f64 / pos as f64,
        fpr: fp as f64 / neg as f64,
    }
}

/// ROC points sorted by threshold; the first point is `(0, 0)` and the last
/// `(1, 1)`.
pub fn roc_curve(distances: &[f64], truths: &[bool], n_thresholds: usize) -> Result<Vec<RocPoint>> {
    check_inputs(distances, truths)?;
    if n_thresholds == 0 {
        bail!(Contract, "n_thresholds must be positive");
    }
    Ok(threshold_grid(distances, n_thresholds)
        .into_iter()
        .map(|t| point_at(distances, truths, t))
        .collect())
}

/// The point where false accepts and false rejects balance best; returns
/// `(eer, threshold)`. Ties go to the lower threshold.
pub fn equal_error_rate(roc: &[RocPoint]) -> Result<(f64, f64)> {
    let mut best: Option<(f64, &RocPoint)> = None;
    for p in roc {
        let gap = (p.fpr - (1.0 - p.tpr)).abs();
        let better = match best {
            None => true,
            Some((g, b)) => gap < g || (gap == g && p.threshold < b.threshold),
        };
        if better {
            best = Some((gap, p));
        }
    }
    let Some((_, p)) = best else {
        bail!(Contract, "equal error rate of an empty ROC curve");
    };
    Ok(((p.fpr + (1.0 - p.tpr)) / 2.0, p.threshold))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    MaxF1,
    Eer,
}

impl std::str::FromStr for Criterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "max_f1" => Ok(Criterion::MaxF1),
            "eer" => Ok(Criterion::Eer),
            other => Err(format!("unknown threshold criterion {other:?}")),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::MaxF1 => "max_f1",
            Criterion::Eer => "eer",
        })
    }
}

/// Picks a decision threshold on the ROC grid: the one with the highest F1,
/// or the equal-error-rate point. Ties go to the lower threshold.
pub fn select_threshold(distances: &[f64], truths: &[bool], criterion: Criterion) -> Result<f64> {
    let roc = roc_curve(distances, truths, DEFAULT_ROC_THRESHOLDS)?;
    match criterion {
        Criterion::Eer => Ok(equal_error_rate(&roc)?.1),
        Criterion::MaxF1 => {
            let mut best = (f64::NEG_INFINITY, roc[0].threshold);
            for p in &roc {
                let decisions: Vec<bool> = distances.iter().map(|&d| decide(d, p.threshold)).collect();
                let f1 = compute_metrics(&confusion(&decisions, truths)?)?.f1;
                if f1 > best.0 {
                    best = (f1, p.threshold);
                }
            }
            Ok(best.1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn separable() -> (Vec<f64>, Vec<bool>) {
        (vec![0.1, 0.2, 0.9, 1.0], vec![true, true, false, false])
    }

    #[test]
    fn separable_has_perfect_point() {
        let (d, t) = separable();
        let roc = roc_curve(&d, &t, 11).unwrap();
        assert!(roc.iter().any(|p| p.tpr == 1.0 && p.fpr == 0.0));
        assert_eq!(equal_error_rate(&roc).unwrap().0, 0.0);
    }

    #[test]
    fn endpoints_present() {
        let (d, t) = separable();
        let roc = roc_curve(&d, &t, 5).unwrap();
        let first = roc.first().unwrap();
        let last = roc.last().unwrap();
        assert_eq!((first.tpr, first.fpr), (0.0, 0.0));
        assert!(first.threshold < 0.1);
        assert_eq!((last.tpr, last.fpr), (1.0, 1.0));
        assert_eq!(last.threshold, 1.0);
    }

    #[test]
    fn identical_distances_give_half() {
        let d = vec![0.4; 6];
        let t = vec![true, false, true, false, true, false];
        let roc = roc_curve(&d, &t, 10).unwrap();
        let (eer, thr) = equal_error_rate(&roc).unwrap();
        assert_eq!(eer, 0.5);
        assert!(thr < 0.4);
    }

    #[test]
    fn single_class_is_data_error() {
        assert!(matches!(roc_curve(&[0.1, 0.2], &[true, true], 5), Err(Error::Data(_))));
        assert!(select_threshold(&[0.1, 0.2], &[false, false], Criterion::MaxF1).is_err());
    }

    #[test]
    fn separable_threshold_is_lowest_gap_point() {
        let (d, t) = separable();
        for c in [Criterion::MaxF1, Criterion::Eer] {
            let thr = select_threshold(&d, &t, c).unwrap();
            let grid = threshold_grid(&d, DEFAULT_ROC_THRESHOLDS);
            let lowest = grid.iter().copied().find(|&g| g >= 0.2 && g < 0.9).unwrap();
            assert_eq!(thr, lowest, "{c}");
        }
    }

    #[test]
    fn grid_with_one_threshold_keeps_both_ends() {
        let g = threshold_grid(&[0.5, 2.0], 1);
        assert_eq!(g.len(), 3);
        assert_eq!(g[1], 0.5);
        assert_eq!(g[2], 2.0);
    }
}
