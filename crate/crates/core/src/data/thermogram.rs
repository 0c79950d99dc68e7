use crate::error::{bail, Result};

/// Plausible range for a sensor reading, in °C.
pub const MIN_PLAUSIBLE_C: f64 = -40.0;
pub const MAX_PLAUSIBLE_C: f64 = 150.0;

/// A single-channel temperature raster in °C, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Thermogram {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    pub subject_id: Option<String>,
    pub session_id: Option<String>,
}

impl Thermogram {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            bail!(Data, "thermogram must be non-empty, got {width}×{height}");
        }
        if width * height != pixels.len() {
            bail!(
                Data,
                "{width}×{height} thermogram needs {} pixels, got {}",
                width * height,
                pixels.len()
            );
        }
        if let Some(i) = pixels
            .iter()
            .position(|v| !(MIN_PLAUSIBLE_C..=MAX_PLAUSIBLE_C).contains(v))
        {
            bail!(
                Data,
                "pixel ({}, {}) = {} °C is outside [{MIN_PLAUSIBLE_C}, {MAX_PLAUSIBLE_C}]",
                i % width,
                i / width,
                pixels[i]
            );
        }
        Ok(Thermogram {
            width,
            height,
            pixels,
            subject_id: None,
            session_id: None,
        })
    }

    pub fn with_labels(mut self, subject_id: impl Into<String>, session_id: impl Into<String>) -> Self {
        self.subject_id = Some(subject_id.into());
        self.session_id = Some(session_id.into());
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same labels, new raster of identical dimensions.
    pub(crate) fn with_pixels(&self, pixels: Vec<f64>) -> Result<Self> {
        let mut t = Thermogram::new(self.width, self.height, pixels)?;
        t.subject_id.clone_from(&self.subject_id);
        t.session_id.clone_from(&self.session_id);
        Ok(t)
    }
}
