//! The Siamese encoder. There is exactly one [`ModelParams`] value per
//! model; both towers of a pair are evaluated with it.

mod config;
mod encoder;
mod io;

pub use config::{ConvBlock, EncoderConfig, ENCODER_KEYS};
pub use encoder::{build_encoder, euclidean_distance, Embedding, ModelParams};
pub use io::{load_params, save_params, MODEL_MAGIC};
