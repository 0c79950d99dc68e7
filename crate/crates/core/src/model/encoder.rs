use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::EncoderConfig;
use crate::error::{bail, Result};
use crate::numeric::{ops, GradTape, Tensor, TensorId};

/// The single weight set behind both Siamese towers.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: EncoderConfig,
    tensors: Vec<Tensor>,
}

/// Fixed-length feature vector produced by the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            bail!(Data, "embedding contains a non-finite value");
        }
        Ok(Embedding(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `sqrt(Σ(aᵢ − bᵢ)²)`.
pub fn euclidean_distance(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.len() != b.len() {
        bail!(
            Dimension,
            "embeddings of length {} and {} are not comparable",
            a.len(),
            b.len()
        );
    }
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Initializes a fresh encoder. Weights are drawn uniformly from
/// `±sqrt(6 / fan_in)` for convolutions and `±sqrt(3 / fan_in)` for the
/// final linear layer; biases start at zero.
pub fn build_encoder(config: EncoderConfig) -> Result<ModelParams> {
    let shapes = config.parameter_shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let last_weights = shapes.len() - 2;
    let tensors = shapes
        .iter()
        .enumerate()
        .map(|(i, shape)| {
            if i % 2 == 1 {
                return Tensor::zeros(shape);
            }
            let fan_in: usize = shape[1..].iter().product();
            let gain = if i == last_weights { 3.0 } else { 6.0 };
            let bound = (gain / fan_in as f64).sqrt();
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
            Tensor::from_parts(shape.clone(), data)
        })
        .collect();
    Ok(ModelParams { config, tensors })
}

impl ModelParams {
    /// Assembles parameters from explicit tensors, checking them against the
    /// shapes the config implies.
    pub fn from_tensors(config: EncoderConfig, tensors: Vec<Tensor>) -> Result<Self> {
        let shapes = config.parameter_shapes()?;
        if shapes.len() != tensors.len() {
            bail!(
                Dimension,
                "config needs {} parameter tensors, got {}",
                shapes.len(),
                tensors.len()
            );
        }
        for (i, (shape, t)) in shapes.iter().zip(&tensors).enumerate() {
            if t.shape() != shape.as_slice() {
                bail!(
                    Dimension,
                    "parameter {i} has shape {:?}, expected {shape:?}",
                    t.shape()
                );
            }
            if !t.is_finite() {
                bail!(Data, "parameter {i} has non-finite values");
            }
        }
        Ok(ModelParams { config, tensors })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let s = self.config.input_size;
        if input.shape() != [1, s, s] {
            bail!(
                Dimension,
                "encoder expects input shape [1, {s}, {s}], got {:?}",
                input.shape()
            );
        }
        Ok(())
    }

    /// Embeds one preprocessed `1×S×S` image.
    pub fn embed(&self, input: &Tensor) -> Result<Embedding> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (block, pair) in self.config.conv_blocks.iter().zip(self.tensors.chunks_exact(2)) {
            let conv = ops::conv2d(&x, &pair[0], &pair[1], 1)?;
            let act = ops::relu(&conv);
            x = ops::max_pool2d(&act, block.pool)?.0;
        }
        let n = self.tensors.len();
        let out = ops::dense(&x, &self.tensors[n - 2], &self.tensors[n - 1])?;
        Embedding::new(out.into_data())
    }

    /// Registers every parameter tensor on `tape` as a leaf. The returned ids
    /// are shared by every tower built with [`ModelParams::forward`].
    pub fn register<'a>(&'a self, tape: &mut GradTape<'a>) -> Vec<TensorId> {
        self.tensors.iter().map(|t| tape.leaf_ref(t)).collect()
    }

    /// Records one encoder tower on `tape` using the registered parameters.
    pub fn forward(&self, tape: &mut GradTape, params: &[TensorId], input: TensorId) -> Result<TensorId> {
        self.check_input(tape.value(input))?;
        if params.len() != self.tensors.len() {
            bail!(Contract, "expected {} parameter ids", self.tensors.len());
        }
        let mut x = input;
        for (block, ids) in self.config.conv_blocks.iter().zip(params.chunks_exact(2)) {
            let conv = tape.conv2d(x, ids[0], ids[1], 1)?;
            let act = tape.relu(conv);
            x = tape.max_pool2d(act, block.pool)?;
        }
        let flat = tape.flatten(x);
        let n = params.len();
        tape.dense(flat, params[n - 2], params[n - 1])
    }
}
