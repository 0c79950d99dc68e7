//! Procedural thermogram generator standing in for recorded video frames.
//!
//! Each identity is a fixed template: a warm face ellipse over a cool
//! background with a subject-specific pattern of warm vessel strokes. Each
//! frame re-renders the template under a small pose change, a smooth
//! elastic warp (a stand-in for expression changes), a global ambient
//! offset, sensor noise and, sometimes, a cold band where glasses block
//! emission.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DatasetManifest, Thermogram};
use crate::error::{bail, Result};
use crate::kv::KeyValues;
use crate::rng;

pub const BACKGROUND_C: f64 = 22.0;
pub const SKIN_C: f64 = 34.0;
pub const VESSEL_DELTA_C: f64 = 1.5;
pub const GLASSES_C: f64 = 24.0;
pub const HAIR_C: f64 = 25.0;
pub const NECK_C: f64 = 33.0;

/// Geometry is authored for a 64-pixel frame and scaled to `image_size`.
const REFERENCE_SIZE: f64 = 64.0;
const SEGMENTS_PER_VESSEL: usize = 4;
/// Smooth subject-specific patches (cool nose, warm periorbital areas and
/// the like), magnitude range in °C.
const REGION_COUNT: usize = 8;
/// Distinct subjects must not look alike pixel for pixel.
pub const MAX_TEMPLATE_CORRELATION: f64 = 0.92;
const TEMPLATE_ATTEMPTS: usize = 64;
const REGION_DELTA_C: (f64, f64) = (2.0, 4.0);
const MAX_POSE_ROTATION_DEG: f64 = 2.0;
const MAX_POSE_SCALE: f64 = 0.02;
const MAX_POSE_SHIFT_PX: f64 = 0.75;
const EDGE_WIDTH_PX: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_identities: usize,
    pub frames_per_identity: usize,
    pub image_size: usize,
    pub vessel_count: usize,
    /// Standard deviation of per-pixel sensor noise, millikelvin.
    pub session_noise_mk: f64,
    /// Half-width of the uniform per-frame ambient offset, °C.
    pub ambient_drift_c: f64,
    pub glasses_probability: f64,
    pub warp_amplitude_px: f64,
    pub seed: u64,
}

/// Config-file keys understood by [`SynthConfig::from_key_values`].
pub const SYNTH_KEYS: [&str; 9] = [
    "n_identities",
    "frames_per_identity",
    "image_size",
    "vessel_count",
    "session_noise_mk",
    "ambient_drift_c",
    "glasses_probability",
    "warp_amplitude_px",
    "seed",
];

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_identities: 12,
            frames_per_identity: 40,
            image_size: 64,
            vessel_count: 12,
            session_noise_mk: 30.0,
            ambient_drift_c: 0.5,
            glasses_probability: 0.1,
            warp_amplitude_px: 1.5,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_identities == 0 || self.frames_per_identity == 0 {
            bail!(Config, "n_identities and frames_per_identity must be positive");
        }
        if self.image_size < 16 {
            bail!(Config, "image_size must be at least 16, got {}", self.image_size);
        }
        if self.vessel_count == 0 {
            bail!(Config, "vessel_count must be positive");
        }
        for (name, v) in [
            ("session_noise_mk", self.session_noise_mk),
            ("ambient_drift_c", self.ambient_drift_c),
            ("warp_amplitude_px", self.warp_amplitude_px),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bail!(Config, "{name} must be finite and non-negative, got {v}");
            }
        }
        if !(0.0..=1.0).contains(&self.glasses_probability) {
            bail!(
                Config,
                "glasses_probability must lie in [0, 1], got {}",
                self.glasses_probability
            );
        }
        Ok(())
    }

    /// Reads the synthesis keys of `kv`, defaulting the absent ones.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = SynthConfig::default();
        let cfg = SynthConfig {
            n_identities: kv.get_or("n_identities", d.n_identities)?,
            frames_per_identity: kv.get_or("frames_per_identity", d.frames_per_identity)?,
            image_size: kv.get_or("image_size", d.image_size)?,
            vessel_count: kv.get_or("vessel_count", d.vessel_count)?,
            session_noise_mk: kv.get_or("session_noise_mk", d.session_noise_mk)?,
            ambient_drift_c: kv.get_or("ambient_drift_c", d.ambient_drift_c)?,
            glasses_probability: kv.get_or("glasses_probability", d.glasses_probability)?,
            warp_amplitude_px: kv.get_or("warp_amplitude_px", d.warp_amplitude_px)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("n_identities", self.n_identities.to_string());
        kv.set("frames_per_identity", self.frames_per_identity.to_string());
        kv.set("image_size", self.image_size.to_string());
        kv.set("vessel_count", self.vessel_count.to_string());
        kv.set("session_noise_mk", self.session_noise_mk.to_string());
        kv.set("ambient_drift_c", self.ambient_drift_c.to_string());
        kv.set("glasses_probability", self.glasses_probability.to_string());
        kv.set("warp_amplitude_px", self.warp_amplitude_px.to_string());
        kv.set("seed", self.seed.to_string());
        kv
    }

    fn unit(&self) -> f64 {
        self.image_size as f64 / REFERENCE_SIZE
    }
}

pub fn subject_label(identity: usize) -> String {
    format!("id{identity:03}")
}

pub const SESSION_LABEL: &str = "stream-00";

/// Fixed per-identity appearance in frame pixel coordinates.
#[derive(Clone, Debug)]
pub struct IdentityTemplate {
    center: (f64, f64),
    axes: (f64, f64),
    /// Line segments `(x0, y0, x1, y1)` of all vessel strokes.
    segments: Vec<[f64; 4]>,
    /// Regional warm or cool patches `(x, y, radius, delta_c)`.
    regions: Vec<[f64; 4]>,
    /// Row above which hair covers the face.
    hairline_y: f64,
    /// Half-width of the neck below the face.
    neck_half_width: f64,
    vessel_sigma: f64,
    edge_width: f64,
}

impl IdentityTemplate {
    /// One candidate appearance for `identity`; `attempt` selects among
    /// independent draws.
    pub fn candidate(config: &SynthConfig, identity: usize, attempt: usize) -> Self {
        let mut rng = rng::stream(config.seed, &[rng::IDENTITY, identity as u64, attempt as u64]);
        let s = config.image_size as f64;
        let u = config.unit();
        let center = (
            s / 2.0 + rng.gen_range(-0.07..0.07) * s,
            s / 2.0 + rng.gen_range(-0.06..0.06) * s,
        );
        let axes = (rng.gen_range(0.24..0.38) * s, rng.gen_range(0.32..0.45) * s);

        let mut segments = Vec::with_capacity(config.vessel_count * SEGMENTS_PER_VESSEL);
        for _ in 0..config.vessel_count {
            // Walk in unit-disk face coordinates so strokes stay on the face.
            let r = 0.8 * rng.gen::<f64>().sqrt();
            let phi = rng.gen_range(0.0..2.0 * PI);
            let (mut fx, mut fy) = (r * phi.cos(), r * phi.sin());
            let mut heading = rng.gen_range(0.0..2.0 * PI);
            for _ in 0..SEGMENTS_PER_VESSEL {
                heading += rng.gen_range(-0.7..0.7);
                let step = rng.gen_range(0.12..0.24);
                let (mut nx, mut ny) = (fx + step * heading.cos(), fy + step * heading.sin());
                let norm = (nx * nx + ny * ny).sqrt();
                if norm > 0.85 {
                    nx *= 0.85 / norm;
                    ny *= 0.85 / norm;
                    heading += PI / 2.0;
                }
                segments.push([
                    center.0 + fx * axes.0,
                    center.1 + fy * axes.1,
                    center.0 + nx * axes.0,
                    center.1 + ny * axes.1,
                ]);
                (fx, fy) = (nx, ny);
            }
        }
        let regions = (0..REGION_COUNT)
            .map(|_| {
                let r = 0.7 * rng.gen::<f64>().sqrt();
                let phi = rng.gen_range(0.0..2.0 * PI);
                let radius = rng.gen_range(0.2..0.35) * axes.0.min(axes.1);
                let magnitude = rng.gen_range(REGION_DELTA_C.0..REGION_DELTA_C.1);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                [
                    center.0 + r * phi.cos() * axes.0,
                    center.1 + r * phi.sin() * axes.1,
                    radius,
                    sign * magnitude,
                ]
            })
            .collect();
        let hairline_y = center.1 - rng.gen_range(0.3..0.85) * axes.1;
        let neck_half_width = rng.gen_range(0.35..0.7) * axes.0;
        IdentityTemplate {
            center,
            axes,
            segments,
            regions,
            hairline_y,
            neck_half_width,
            vessel_sigma: 0.8 * u,
            edge_width: EDGE_WIDTH_PX * u,
        }
    }

    /// Weight in `[0, 1]` of the face region at a point, smooth at the rim.
    fn face_weight(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.center.0) / self.axes.0;
        let dy = (y - self.center.1) / self.axes.1;
        let r = (dx * dx + dy * dy).sqrt();
        let signed_px = (1.0 - r) * self.axes.0.min(self.axes.1);
        logistic(signed_px / self.edge_width)
    }

    fn vessel_distance(&self, x: f64, y: f64) -> f64 {
        self.segments
            .iter()
            .map(|&[x0, y0, x1, y1]| {
                let (vx, vy) = (x1 - x0, y1 - y0);
                let len2 = vx * vx + vy * vy;
                let t = if len2 > 0.0 {
                    (((x - x0) * vx + (y - y0) * vy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (px, py) = (x0 + t * vx - x, y0 + t * vy - y);
                px * px + py * py
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    fn in_eye_band(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.center.0) / self.axes.0;
        let dy = (y - self.center.1) / self.axes.1;
        dx.abs() < 0.85 && (-0.42..=-0.16).contains(&dy)
    }

    /// Noise-free temperature at a point of the canonical pose.
    pub fn temperature_at(&self, x: f64, y: f64) -> f64 {
        let w = self.face_weight(x, y);
        let d = self.vessel_distance(x, y);
        let vessel = VESSEL_DELTA_C * (-(d * d) / (2.0 * self.vessel_sigma * self.vessel_sigma)).exp();
        let regional: f64 = self
            .regions
            .iter()
            .map(|&[rx, ry, radius, delta]| {
                let q = ((x - rx) * (x - rx) + (y - ry) * (y - ry)) / (2.0 * radius * radius);
                delta * (-q).exp()
            })
            .sum::<f64>()
            .clamp(-REGION_DELTA_C.1, REGION_DELTA_C.1);
        let skin = w * (SKIN_C - BACKGROUND_C + regional + vessel);
        // Hair insulates the scalp and shows close to ambient.
        let hair = logistic((self.hairline_y - y) / self.edge_width);
        let hair_cover = w * hair * (SKIN_C - HAIR_C + regional + vessel);
        let neck = logistic((self.neck_half_width - (x - self.center.0).abs()) / self.edge_width)
            * logistic((y - self.center.1) / self.edge_width)
            * (1.0 - w)
            * (NECK_C - BACKGROUND_C);
        BACKGROUND_C + skin - hair_cover + neck
    }

    /// The identity in canonical pose without noise, glasses or drift.
    pub fn render(&self, size: usize) -> Vec<f64> {
        (0..size * size)
            .map(|i| self.temperature_at((i % size) as f64, (i / size) as f64))
            .collect()
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Templates for every identity. A candidate that correlates above
/// [`MAX_TEMPLATE_CORRELATION`] with an earlier identity is redrawn, keeping
/// the least similar candidate if none qualifies.
pub fn identity_templates(config: &SynthConfig) -> Vec<IdentityTemplate> {
    let n = config.image_size;
    let mut templates: Vec<IdentityTemplate> = Vec::with_capacity(config.n_identities);
    let mut renders: Vec<Vec<f64>> = Vec::with_capacity(config.n_identities);
    for i in 0..config.n_identities {
        let mut best: Option<(f64, IdentityTemplate, Vec<f64>)> = None;
        for attempt in 0..TEMPLATE_ATTEMPTS {
            let t = IdentityTemplate::candidate(config, i, attempt);
            let r = t.render(n);
            let worst = renders
                .iter()
                .map(|o| correlation(o, &r))
                .fold(f64::NEG_INFINITY, f64::max);
            let done = worst < MAX_TEMPLATE_CORRELATION;
            if best.as_ref().map_or(true, |(b, _, _)| worst < *b) {
                best = Some((worst, t, r));
            }
            if done {
                break;
            }
        }
        let (_, t, r) = best.expect("at least one attempt");
        templates.push(t);
        renders.push(r);
    }
    templates
}

struct WarpTerm {
    fx: f64,
    fy: f64,
    phase: f64,
}

/// Renders frame `frame` of `identity`.
pub fn render_frame(config: &SynthConfig, template: &IdentityTemplate, identity: usize, frame: usize) -> Result<Thermogram> {
    let mut rng = rng::stream(config.seed, &[rng::FRAME, identity as u64, frame as u64]);
    let n = config.image_size;
    let s = n as f64;
    let u = config.unit();

    let theta = rng.gen_range(-MAX_POSE_ROTATION_DEG..=MAX_POSE_ROTATION_DEG).to_radians();
    let scale = 1.0 + rng.gen_range(-MAX_POSE_SCALE..=MAX_POSE_SCALE);
    let shift = (
        rng.gen_range(-MAX_POSE_SHIFT_PX..=MAX_POSE_SHIFT_PX) * u,
        rng.gen_range(-MAX_POSE_SHIFT_PX..=MAX_POSE_SHIFT_PX) * u,
    );
    let mut warp_terms = || -> Vec<WarpTerm> {
        (0..2)
            .map(|_| WarpTerm {
                fx: rng.gen_range(-1.5..1.5),
                fy: rng.gen_range(-1.5..1.5),
                phase: rng.gen_range(0.0..2.0 * PI),
            })
            .collect()
    };
    let warp_x = warp_terms();
    let warp_y = warp_terms();
    let ambient = if config.ambient_drift_c > 0.0 {
        rng.gen_range(-config.ambient_drift_c..=config.ambient_drift_c)
    } else {
        0.0
    };
    let glasses = rng.gen_bool(config.glasses_probability);
    let noise = Normal::new(0.0, config.session_noise_mk / 1000.0).expect("validated sigma");

    // Two unit sines per axis: peak displacement equals the amplitude.
    let amp = config.warp_amplitude_px / 2.0;
    let field = |terms: &[WarpTerm], x: f64, y: f64| -> f64 {
        terms
            .iter()
            .map(|t| (2.0 * PI * (t.fx * x + t.fy * y) / s + t.phase).sin())
            .sum::<f64>()
            * amp
    };
    let (cos, sin) = (theta.cos(), theta.sin());
    let c = (s - 1.0) / 2.0;
    let mut pixels = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let (xf, yf) = (x as f64, y as f64);
            let qx = xf + field(&warp_x, xf, yf) - c - shift.0;
            let qy = yf + field(&warp_y, xf, yf) - c - shift.1;
            // Inverse pose: rotate by −θ, undo the scale.
            let sx = c + (cos * qx + sin * qy) / scale;
            let sy = c + (-sin * qx + cos * qy) / scale;
            let base = if glasses && template.in_eye_band(sx, sy) {
                let w = template.face_weight(sx, sy);
                BACKGROUND_C + w * (GLASSES_C - BACKGROUND_C)
            } else {
                template.temperature_at(sx, sy)
            };
            pixels.push(base + ambient + noise.sample(&mut rng));
        }
    }
    Ok(Thermogram::new(n, n, pixels)?.with_labels(subject_label(identity), SESSION_LABEL))
}

/// All frames, identity-major.
pub fn generate_frames(config: &SynthConfig) -> Result<Vec<Thermogram>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.n_identities * config.frames_per_identity);
    for (i, template) in identity_templates(config).iter().enumerate() {
        for j in 0..config.frames_per_identity {
            out.push(render_frame(config, template, i, j)?);
        }
    }
    Ok(out)
}

/// Generates the dataset as an in-memory manifest.
pub fn generate_synthetic(config: &SynthConfig) -> Result<DatasetManifest> {
    DatasetManifest::from_thermograms(generate_frames(config)?)
}

/// Pearson correlation of two equally sized rasters.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}
