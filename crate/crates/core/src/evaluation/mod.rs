//! Verification decisions, confusion counts, accuracy/precision/recall/F1,
//! ROC and equal error rate.

mod metrics;
mod report;
mod roc;

pub use metrics::{compute_metrics, confusion, decide, f1_score, ConfusionCounts, Metrics};
pub use report::{evaluate, evaluation_pairs, pair_distances, EvalReport, DEFAULT_EVAL_PAIRS};
pub use roc::{equal_error_rate, roc_curve, select_threshold, threshold_grid, Criterion, RocPoint, DEFAULT_ROC_THRESHOLDS};
