//! `TVM1` model files: little-endian, magic, encoder config, then every
//! parameter tensor as a shape header followed by `f64` values.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::{ConvBlock, EncoderConfig, ModelParams};
use crate::error::{bail, Error, Result};
use crate::numeric::Tensor;

pub const MODEL_MAGIC: &[u8; 4] = b"TVM1";

/// Upper bound on any declared count, so a corrupt header cannot trigger a
/// huge allocation.
const MAX_COUNT: u32 = 1 << 28;

impl ModelParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.config();
        let mut out = Vec::with_capacity(64 + 8 * self.parameter_count());
        out.extend_from_slice(MODEL_MAGIC);
        let w = &mut out;
        w.write_u32::<LE>(cfg.input_size as u32).unwrap();
        w.write_u32::<LE>(cfg.embedding_dim as u32).unwrap();
        w.write_u32::<LE>(cfg.conv_blocks.len() as u32).unwrap();
        for b in &cfg.conv_blocks {
            w.write_u32::<LE>(b.out_channels as u32).unwrap();
            w.write_u32::<LE>(b.kernel_size as u32).unwrap();
            w.write_u32::<LE>(b.pool as u32).unwrap();
        }
        w.write_u64::<LE>(cfg.seed).unwrap();
        w.write_u32::<LE>(self.tensors().len() as u32).unwrap();
        for t in self.tensors() {
            w.write_u32::<LE>(t.shape().len() as u32).unwrap();
            for &d in t.shape() {
                w.write_u32::<LE>(d as u32).unwrap();
            }
            for &v in t.data() {
                w.write_f64::<LE>(v).unwrap();
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
        if &magic != MODEL_MAGIC {
            bail!(Format, "field `magic`: expected TVM1, found {magic:?}");
        }
        let input_size = read_count(&mut r, "input_size")? as usize;
        let embedding_dim = read_count(&mut r, "embedding_dim")? as usize;
        let n_blocks = read_count(&mut r, "block_count")?;
        let mut conv_blocks = Vec::new();
        for i in 0..n_blocks {
            let out_channels = read_count(&mut r, &format!("blocks[{i}].out_channels"))? as usize;
            let kernel_size = read_count(&mut r, &format!("blocks[{i}].kernel_size"))? as usize;
            let pool = read_count(&mut r, &format!("blocks[{i}].pool"))? as usize;
            conv_blocks.push(ConvBlock::new(out_channels, kernel_size, pool));
        }
        let seed = r.read_u64::<LE>().map_err(|_| truncated("seed"))?;
        let config = EncoderConfig {
            input_size,
            conv_blocks,
            embedding_dim,
            seed,
        };
        let shapes = config
            .parameter_shapes()
            .map_err(|e| Error::Format(format!("field `config`: {e}")))?;

        let n_tensors = read_count(&mut r, "tensor_count")? as usize;
        if n_tensors != shapes.len() {
            bail!(
                Format,
                "field `tensor_count`: config implies {}, file declares {n_tensors}",
                shapes.len()
            );
        }
        let dense_weights = shapes.len() - 2;
        let mut tensors = Vec::with_capacity(n_tensors);
        for (i, expected) in shapes.iter().enumerate() {
            let rank = read_count(&mut r, &format!("tensors[{i}].rank"))? as usize;
            let mut shape = Vec::with_capacity(rank);
            for j in 0..rank {
                shape.push(read_count(&mut r, &format!("tensors[{i}].shape[{j}]"))? as usize);
            }
            if &shape != expected {
                // A mismatched output width is the common corruption; name it.
                let field = if i >= dense_weights && shape.first() != expected.first() {
                    "embedding_dim".to_string()
                } else {
                    format!("tensors[{i}].shape")
                };
                bail!(
                    Format,
                    "field `{field}`: tensor {i} declared {shape:?}, config implies {expected:?}"
                );
            }
            let n: usize = shape.iter().product();
            let mut data = vec![0.0; n];
            r.read_f64_into::<LE>(&mut data)
                .map_err(|_| truncated(&format!("tensors[{i}].data")))?;
            let t = Tensor::new(shape, data)
                .map_err(|e| Error::Format(format!("field `tensors[{i}].data`: {e}")))?;
            tensors.push(t);
        }
        if (r.position() as usize) != bytes.len() {
            bail!(
                Format,
                "field `trailer`: {} unexpected bytes after the last tensor",
                bytes.len() - r.position() as usize
            );
        }
        ModelParams::from_tensors(config, tensors)
            .map_err(|e| Error::Format(format!("field `tensors`: {e}")))
    }

    /// SHA-256 of the serialized model; binds galleries to the model that
    /// produced their embeddings.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

fn truncated(field: &str) -> Error {
    Error::Format(format!("field `{field}`: file truncated"))
}

fn read_count(r: &mut Cursor<&[u8]>, field: &str) -> Result<u32> {
    let v = r.read_u32::<LE>().map_err(|_| truncated(field))?;
    if v > MAX_COUNT {
        bail!(Format, "field `{field}`: implausible value {v}");
    }
    Ok(v)
}

pub fn save_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, params.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelParams::from_bytes(&bytes)
}
