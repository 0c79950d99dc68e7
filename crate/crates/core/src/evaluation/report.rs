use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{compute_metrics, confusion, decide, ConfusionCounts, Metrics};
use super::roc::{equal_error_rate, roc_curve, RocPoint, DEFAULT_ROC_THRESHOLDS};
use crate::data::{preprocess, DatasetManifest};
use crate::error::{bail, Error, Result};
use crate::model::{euclidean_distance, Embedding, ModelParams};
use crate::rng;
use crate::training::{make_pairs, PairSample};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc: Vec<RocPoint>,
    pub eer: f64,
    pub eer_threshold: f64,
    /// Decision threshold the confusion counts were taken at.
    pub threshold: f64,
}

impl EvalReport {
    /// Builds the report from precomputed pair distances.
    pub fn from_distances(distances: &[f64], truths: &[bool], tau: f64) -> Result<Self> {
        let decisions: Vec<bool> = distances.iter().map(|&d| decide(d, tau)).collect();
        let c = confusion(&decisions, truths)?;
        let Metrics {
            accuracy,
            precision,
            recall,
            f1,
        } = compute_metrics(&c)?;
        let roc = roc_curve(distances, truths, DEFAULT_ROC_THRESHOLDS)?;
        let (eer, eer_threshold) = equal_error_rate(&roc)?;
        Ok(EvalReport {
            confusion: c,
            accuracy,
            precision,
            recall,
            f1,
            roc,
            eer,
            eer_threshold,
            threshold: tau,
        })
    }

    pub fn to_text(&self) -> String {
        let c = &self.confusion;
        let mut s = String::new();
        writeln!(s, "pairs      {}", c.total()).unwrap();
        writeln!(s, "threshold  {:.6}", self.threshold).unwrap();
        writeln!(s, "tp {}  fp {}  tn {}  fn {}", c.tp, c.fp, c.tn, c.fn_).unwrap();
        writeln!(s, "accuracy   {:.4}", self.accuracy).unwrap();
        writeln!(s, "precision  {:.4}", self.precision).unwrap();
        writeln!(s, "recall     {:.4}", self.recall).unwrap();
        writeln!(s, "f1         {:.4}", self.f1).unwrap();
        writeln!(s, "eer        {:.4} (threshold {:.6})", self.eer, self.eer_threshold).unwrap();
        s
    }

    /// One `roc` row per ROC point and a final `summary` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,threshold,tpr,fpr,accuracy,precision,recall,f1,eer\n");
        for p in &self.roc {
            writeln!(s, "roc,{},{},{},,,,,", p.threshold, p.tpr, p.fpr).unwrap();
        }
        writeln!(
            s,
            "summary,{},,,{},{},{},{},{}",
            self.threshold, self.accuracy, self.precision, self.recall, self.f1, self.eer
        )
        .unwrap();
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Embeds every frame `pairs` refer to (once each) and returns the pair
/// distances in pair order.
pub fn pair_distances(params: &ModelParams, testset: &DatasetManifest, pairs: &[PairSample]) -> Result<Vec<f64>> {
    let n = testset.len();
    if let Some(p) = pairs.iter().find(|p| p.index_a >= n || p.index_b >= n) {
        bail!(
            Contract,
            "pair ({}, {}) is out of range for a {n}-frame test set",
            p.index_a,
            p.index_b
        );
    }
    let size = params.config().input_size;
    let mut cache: Vec<Option<Embedding>> = vec![None; n];
    for p in pairs {
        for i in [p.index_a, p.index_b] {
            if cache[i].is_none() {
                cache[i] = Some(params.embed(&preprocess(&testset.load(i)?, size)?)?);
            }
        }
    }
    pairs
        .iter()
        .map(|p| {
            euclidean_distance(
                cache[p.index_a].as_ref().unwrap(),
                cache[p.index_b].as_ref().unwrap(),
            )
        })
        .collect()
}

/// Number of balanced pairs drawn for evaluation unless configured.
pub const DEFAULT_EVAL_PAIRS: usize = 200;

/// The balanced evaluation pairs for a test set: `make_pairs` on the
/// test labels with a seed derived from `seed`, so evaluation never reuses
/// a training pair stream.
pub fn evaluation_pairs(testset: &DatasetManifest, n_pairs: usize, seed: u64) -> Result<Vec<PairSample>> {
    make_pairs(&testset.labels(), n_pairs, rng::derive_seed(seed, &[rng::EVAL_PAIRS]))
}

/// Verification metrics of `params` on `pairs` at threshold `tau`.
pub fn evaluate(params: &ModelParams, testset: &DatasetManifest, pairs: &[PairSample], tau: f64) -> Result<EvalReport> {
    let distances = pair_distances(params, testset, pairs)?;
    let truths: Vec<bool> = pairs.iter().map(|p| p.is_same).collect();
    EvalReport::from_distances(&distances, &truths, tau)
}
