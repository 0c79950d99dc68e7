//! Thermal face verification with a Siamese encoder.
//!
//! The crate covers the whole pipeline: a small `f64` tensor engine with
//! reverse-mode gradients ([`numeric`]), the shared-weight encoder
//! ([`model`]), contrastive training on thermogram pairs ([`training`]),
//! thermogram ingestion and synthesis ([`data`]), verification metrics
//! ([`evaluation`]) and an enrollment gallery ([`gallery`]).
//!
//! ```
//! use thermoface::data::{generate_synthetic, preprocess, SynthConfig};
//! use thermoface::model::{build_encoder, euclidean_distance, EncoderConfig};
//!
//! let frames = generate_synthetic(&SynthConfig {
//!     n_identities: 2,
//!     frames_per_identity: 2,
//!     ..SynthConfig::default()
//! })?;
//! let params = build_encoder(EncoderConfig::default())?;
//! let a = params.embed(&preprocess(&frames.load(0)?, 64)?)?;
//! let b = params.embed(&preprocess(&frames.load(2)?, 64)?)?;
//! assert!(euclidean_distance(&a, &b)? > 0.0);
//! # Ok::<(), thermoface::Error>(())
//! ```

pub mod data;
mod error;
pub mod evaluation;
pub mod gallery;
pub mod kv;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
