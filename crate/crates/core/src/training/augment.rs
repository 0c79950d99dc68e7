use rand::Rng;

use crate::data::{bilinear, Thermogram};
use crate::error::{bail, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugParams {
    pub max_rotation_deg: f64,
    pub scale_range: (f64, f64),
    pub enabled: bool,
}

impl Default for AugParams {
    fn default() -> Self {
        AugParams {
            max_rotation_deg: 10.0,
            scale_range: (0.9, 1.1),
            enabled: true,
        }
    }
}

impl AugParams {
    pub fn disabled() -> Self {
        AugParams {
            enabled: false,
            ..AugParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(self.max_rotation_deg >= 0.0 && self.max_rotation_deg.is_finite()) {
            bail!(Config, "max_rotation_deg must be finite and non-negative");
        }
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            bail!(Config, "scale range must satisfy 0 < lo ≤ 1 ≤ hi, got ({lo}, {hi})");
        }
        Ok(())
    }
}

/// Rotates by `angle_deg` about the image center and scales by `scale`,
/// resampling bilinearly. Pixels that map outside the source take the
/// source minimum.
pub fn rotate_scale(t: &Thermogram, angle_deg: f64, scale: f64) -> Result<Thermogram> {
    if !(scale > 0.0) {
        bail!(Contract, "scale must be positive, got {scale}");
    }
    let (w, h) = (t.width(), t.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let theta = angle_deg.to_radians();
    let (cos, sin) = (theta.cos(), theta.sin());
    let fill = t.min();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (qx, qy) = (x as f64 - cx, y as f64 - cy);
            let sx = cx + (cos * qx + sin * qy) / scale;
            let sy = cy + (-sin * qx + cos * qy) / scale;
            out.push(bilinear(t.pixels(), w, h, sx, sy).unwrap_or(fill));
        }
    }
    t.with_pixels(out)
}

/// Random slight rotation and rescaling drawn from `p`.
pub fn augment<R: Rng + ?Sized>(t: &Thermogram, p: &AugParams, rng: &mut R) -> Result<Thermogram> {
    if !p.enabled {
        return Ok(t.clone());
    }
    p.validate()?;
    let angle = rng.gen_range(-p.max_rotation_deg..=p.max_rotation_deg);
    let scale = rng.gen_range(p.scale_range.0..=p.scale_range.1);
    rotate_scale(t, angle, scale)
}
