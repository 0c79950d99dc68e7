use crate::error::{bail, Error, Result};
use crate::kv::KeyValues;
use crate::numeric::ops::conv_output_size;

/// One convolution stage: valid `kernel_size` convolution to `out_channels`,
/// ReLU, then non-overlapping `pool`×`pool` max pooling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvBlock {
    pub out_channels: usize,
    pub kernel_size: usize,
    pub pool: usize,
}

impl ConvBlock {
    pub const fn new(out_channels: usize, kernel_size: usize, pool: usize) -> Self {
        ConvBlock {
            out_channels,
            kernel_size,
            pool,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    /// Side length of the square single-channel input.
    pub input_size: usize,
    pub conv_blocks: Vec<ConvBlock>,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    /// Three blocks of 8, 16 and 32 channels on a 64×64 input. The first
    /// kernel is 5×5 so that every pooling stage sees an even size
    /// (64 → 60 → 30 → 28 → 14 → 12 → 6).
    fn default() -> Self {
        EncoderConfig {
            input_size: 64,
            conv_blocks: vec![
                ConvBlock::new(8, 5, 2),
                ConvBlock::new(16, 3, 2),
                ConvBlock::new(32, 3, 2),
            ],
            embedding_dim: 64,
            seed: 42,
        }
    }
}

/// Shapes of every stage, computed once from a validated config.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    /// `(channels, side)` after each block.
    pub stages: Vec<(usize, usize)>,
    pub flat_len: usize,
}

/// Config-file keys understood by [`EncoderConfig::from_key_values`].
/// `conv_blocks` lists `out_channels:kernel:pool` triples separated by
/// commas.
pub const ENCODER_KEYS: [&str; 4] = ["input_size", "conv_blocks", "embedding_dim", "seed"];

impl EncoderConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = EncoderConfig::default();
        let conv_blocks = match kv.get("conv_blocks") {
            None => d.conv_blocks,
            Some(raw) => parse_blocks(raw)?,
        };
        let cfg = EncoderConfig {
            input_size: kv.get_or("input_size", d.input_size)?,
            conv_blocks,
            embedding_dim: kv.get_or("embedding_dim", d.embedding_dim)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let blocks: Vec<String> = self
            .conv_blocks
            .iter()
            .map(|b| format!("{}:{}:{}", b.out_channels, b.kernel_size, b.pool))
            .collect();
        let mut kv = KeyValues::new();
        kv.set("input_size", self.input_size.to_string());
        kv.set("conv_blocks", blocks.join(","));
        kv.set("embedding_dim", self.embedding_dim.to_string());
        kv.set("seed", self.seed.to_string());
        kv
    }

    /// Same architecture with a different input side.
    pub fn with_input_size(mut self, input_size: usize) -> Self {
        self.input_size = input_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.layout().map(|_| ())
    }

    pub(crate) fn layout(&self) -> Result<Layout> {
        if self.input_size == 0 {
            bail!(Config, "input_size must be positive");
        }
        if self.embedding_dim < 2 {
            bail!(
                Config,
                "embedding_dim must be at least 2, got {}",
                self.embedding_dim
            );
        }
        let mut channels = 1;
        let mut side = self.input_size;
        let mut stages = Vec::with_capacity(self.conv_blocks.len());
        for (i, block) in self.conv_blocks.iter().enumerate() {
            if block.out_channels == 0 || block.kernel_size == 0 || block.pool == 0 {
                bail!(Config, "block {i} has a zero-sized field: {block:?}");
            }
            let Some(conv) = conv_output_size(side, block.kernel_size, 1) else {
                bail!(
                    Config,
                    "block {i}: kernel {} does not fit spatial size {side}",
                    block.kernel_size
                );
            };
            if conv % block.pool != 0 {
                bail!(
                    Config,
                    "block {i}: pool {} does not divide spatial size {conv}",
                    block.pool
                );
            }
            side = conv / block.pool;
            channels = block.out_channels;
            stages.push((channels, side));
        }
        Ok(Layout {
            stages,
            flat_len: channels * side * side,
        })
    }

    /// Shapes of the parameter tensors in storage order: for each block its
    /// kernels and bias, then the dense weights and bias.
    pub fn parameter_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let layout = self.layout()?;
        let mut shapes = Vec::with_capacity(2 * self.conv_blocks.len() + 2);
        let mut c_in = 1;
        for block in &self.conv_blocks {
            shapes.push(vec![block.out_channels, c_in, block.kernel_size, block.kernel_size]);
            shapes.push(vec![block.out_channels]);
            c_in = block.out_channels;
        }
        shapes.push(vec![self.embedding_dim, layout.flat_len]);
        shapes.push(vec![self.embedding_dim]);
        Ok(shapes)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self
            .parameter_shapes()?
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum())
    }
}

fn parse_blocks(raw: &str) -> Result<Vec<ConvBlock>> {
    raw.split(',')
        .map(|triple| {
            let parts: Vec<usize> = triple
                .trim()
                .split(':')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("key `conv_blocks`: bad block {triple:?}")))?;
            match parts[..] {
                [out, k, pool] => Ok(ConvBlock::new(out, k, pool)),
                _ => Err(Error::Config(format!(
                    "key `conv_blocks`: expected out:kernel:pool, got {triple:?}"
                ))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameter_count_by_hand() {
        // 8·1·5·5 + 8, 16·8·3·3 + 16, 32·16·3·3 + 32, 64·(32·6·6) + 64
        let expected = 208 + 1168 + 4640 + 73_792;
        assert_eq!(EncoderConfig::default().parameter_count().unwrap(), expected);
    }

    #[test]
    fn key_values_round_trip() {
        let cfg = EncoderConfig::default().with_input_size(32);
        let kv = cfg.to_key_values();
        assert_eq!(kv.get("conv_blocks"), Some("8:5:2,16:3:2,32:3:2"));
        assert_eq!(EncoderConfig::from_key_values(&kv).unwrap(), cfg);
        let bad = KeyValues::parse("conv_blocks = 8:5").unwrap();
        assert!(matches!(EncoderConfig::from_key_values(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn default_layout() {
        let layout = EncoderConfig::default().layout().unwrap();
        assert_eq!(layout.stages, vec![(8, 30), (16, 14), (32, 6)]);
        assert_eq!(layout.flat_len, 1152);
    }

    #[test]
    fn kernel_larger_than_input() {
        let cfg = EncoderConfig {
            input_size: 4,
            conv_blocks: vec![ConvBlock::new(2, 5, 1)],
            embedding_dim: 4,
            seed: 0,
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn pool_must_divide() {
        let cfg = EncoderConfig::default().with_input_size(65);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn embedding_dim_at_least_two() {
        let cfg = EncoderConfig {
            embedding_dim: 1,
            ..EncoderConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
