use std::fmt::Write as _;
use std::path::Path;

use super::augment::{augment, AugParams};
use super::pairs::make_pairs;
use crate::data::{preprocess, Thermogram};
use crate::error::{bail, Error, Result};
use crate::kv::KeyValues;
use crate::model::ModelParams;
use crate::numeric::{sgd_update, GradTape, Tensor};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    /// `None` means twice the dataset size.
    pub pairs_per_epoch: Option<usize>,
    pub augmentation: AugParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            learning_rate: 0.01,
            margin: 1.0,
            pairs_per_epoch: None,
            augmentation: AugParams::default(),
            seed: 0,
        }
    }
}

/// Config-file keys understood by [`TrainConfig::from_key_values`].
pub const TRAIN_KEYS: [&str; 9] = [
    "epochs",
    "learning_rate",
    "margin",
    "pairs_per_epoch",
    "augment",
    "max_rotation_deg",
    "scale_lo",
    "scale_hi",
    "seed",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bail!(Config, "learning_rate must be positive, got {}", self.learning_rate);
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            bail!(Config, "margin must be positive, got {}", self.margin);
        }
        if self.pairs_per_epoch == Some(0) {
            bail!(Config, "pairs_per_epoch must be positive");
        }
        self.augmentation.validate()
    }

    /// Reads the train keys of `kv`, defaulting the absent ones. Other keys
    /// are ignored so one file can configure several stages.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = TrainConfig::default();
        let pairs: usize = kv.get_or("pairs_per_epoch", 0)?;
        let cfg = TrainConfig {
            epochs: kv.get_or("epochs", d.epochs)?,
            learning_rate: kv.get_or("learning_rate", d.learning_rate)?,
            margin: kv.get_or("margin", d.margin)?,
            pairs_per_epoch: (pairs > 0).then_some(pairs),
            augmentation: AugParams {
                enabled: kv.get_or("augment", d.augmentation.enabled)?,
                max_rotation_deg: kv.get_or("max_rotation_deg", d.augmentation.max_rotation_deg)?,
                scale_range: (
                    kv.get_or("scale_lo", d.augmentation.scale_range.0)?,
                    kv.get_or("scale_hi", d.augmentation.scale_range.1)?,
                ),
            },
            seed: kv.get_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inverse of [`TrainConfig::from_key_values`]; `pairs_per_epoch = 0`
    /// stands for the dataset-size default.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("epochs", self.epochs.to_string());
        kv.set("learning_rate", self.learning_rate.to_string());
        kv.set("margin", self.margin.to_string());
        kv.set("pairs_per_epoch", self.pairs_per_epoch.unwrap_or(0).to_string());
        kv.set("augment", self.augmentation.enabled.to_string());
        kv.set("max_rotation_deg", self.augmentation.max_rotation_deg.to_string());
        kv.set("scale_lo", self.augmentation.scale_range.0.to_string());
        kv.set("scale_hi", self.augmentation.scale_range.1.to_string());
        kv.set("seed", self.seed.to_string());
        kv
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub mean_loss: Vec<f64>,
    pub pair_counts: Vec<usize>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.mean_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_loss.is_empty()
    }

    /// `epoch,mean_loss` rows, epochs numbered from 1. Losses print in
    /// shortest round-trip form so the file is bit-exact.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss\n");
        for (i, l) in self.mean_loss.iter().enumerate() {
            writeln!(s, "{},{l}", i + 1).unwrap();
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Loss and parameter gradients for one pair, both towers evaluated with
/// the same registered parameter set.
pub fn pair_gradients(
    params: &ModelParams,
    a: &Tensor,
    b: &Tensor,
    is_same: bool,
    margin: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = GradTape::new();
    let ids = params.register(&mut tape);
    let xa = tape.constant(a.clone());
    let xb = tape.constant(b.clone());
    let ea = params.forward(&mut tape, &ids, xa)?;
    let eb = params.forward(&mut tape, &ids, xb)?;
    let loss = tape.contrastive(ea, eb, is_same, margin)?;
    let value = tape.value(loss).data()[0];
    let mut grads = tape.backward(loss)?;
    let param_grads = ids
        .iter()
        .zip(params.tensors())
        .map(|(&id, p)| grads.take(id).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    Ok((value, param_grads))
}

/// Runs `epochs × pairs_per_epoch` per-pair SGD steps on the contrastive
/// loss. Every frame must carry a subject label.
pub fn train(
    config: &TrainConfig,
    dataset: &[Thermogram],
    mut params: ModelParams,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((params, history));
    }
    let labels: Vec<&str> = dataset
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.subject_id
                .as_deref()
                .ok_or_else(|| Error::Data(format!("training frame {i} has no subject_id")))
        })
        .collect::<Result<_>>()?;
    let size = params.config().input_size;
    let n_pairs = config.pairs_per_epoch.unwrap_or(2 * dataset.len());

    // Without augmentation every frame maps to one fixed tensor.
    let cached: Option<Vec<Tensor>> = if config.augmentation.enabled {
        None
    } else {
        Some(dataset.iter().map(|t| preprocess(t, size)).collect::<Result<_>>()?)
    };

    for epoch in 0..config.epochs {
        let pairs = make_pairs(&labels, n_pairs, rng::derive_seed(config.seed, &[rng::PAIRS, epoch as u64]))?;
        let mut aug_rng = rng::stream(config.seed, &[rng::AUGMENT, epoch as u64]);
        let mut input = |i: usize| -> Result<Tensor> {
            match &cached {
                Some(c) => Ok(c[i].clone()),
                None => preprocess(&augment(&dataset[i], &config.augmentation, &mut aug_rng)?, size),
            }
        };
        let mut total = 0.0;
        for pair in &pairs {
            let a = input(pair.index_a)?;
            let b = input(pair.index_b)?;
            let (loss, grads) = pair_gradients(&params, &a, &b, pair.is_same, config.margin)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric {
                    epoch: epoch + 1,
                    message: format!("non-finite loss or gradient ({loss})"),
                });
            }
            sgd_update(params.tensors_mut(), &grads, config.learning_rate)?;
            total += loss;
        }
        let mean = total / pairs.len().max(1) as f64;
        if !mean.is_finite() || params.tensors().iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric {
                epoch: epoch + 1,
                message: "parameters diverged".into(),
            });
        }
        history.mean_loss.push(mean);
        history.pair_counts.push(pairs.len());
    }
    Ok((params, history))
}
