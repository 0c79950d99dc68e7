//! Thermogram ingestion, preprocessing, splitting, synthesis and camera
//! profile checks.

mod camera;
mod io;
mod manifest;
mod preprocess;
mod split;
pub mod synth;
mod thermogram;

pub use camera::{validate_camera, CameraProfile, Finding, Level, Rule, PROFILE_KEYS};
pub use io::{load_thermogram, parse_csv_raster, parse_pgm16, save_thermogram, sidecar_path, FrameFormat, Sidecar};
pub use manifest::{DatasetManifest, FrameSource, ManifestEntry};
pub use preprocess::{preprocess, MIN_SIDE};
pub(crate) use preprocess::bilinear;
pub use split::{split_dataset, split_indices, SplitMode, SplitSpec, SPLIT_KEYS};
pub use synth::{generate_synthetic, SynthConfig, SYNTH_KEYS};
pub use thermogram::Thermogram;
