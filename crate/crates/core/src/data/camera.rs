//! Camera suitability rules for thermal face recognition.

use std::fmt;
use std::path::Path;

use crate::error::{bail, Result};
use crate::kv::KeyValues;

/// Hard floor and recommended sensor resolution.
pub const MIN_RESOLUTION: (u32, u32) = (320, 240);
pub const RECOMMENDED_RESOLUTION: (u32, u32) = (640, 512);
/// NETD limit and recommended value, millikelvin.
pub const MAX_NETD_MK: f64 = 30.0;
pub const RECOMMENDED_NETD_MK: f64 = 20.0;
/// Long-wave infrared band, micrometres.
pub const LWIR_BAND_UM: (f64, f64) = (8.0, 14.0);
pub const MIN_FRAME_RATE_HZ: f64 = 30.0;
/// At or below this rate dynamic identification is unreliable.
pub const UNRELIABLE_FRAME_RATE_HZ: f64 = 9.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CameraProfile {
    pub width: u32,
    pub height: u32,
    pub netd_mk: f64,
    pub band_low_um: f64,
    pub band_high_um: f64,
    pub frame_rate_hz: f64,
}

pub const PROFILE_KEYS: [&str; 6] = [
    "width",
    "height",
    "netd_mk",
    "band_low_um",
    "band_high_um",
    "frame_rate_hz",
];

impl CameraProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.width as f64,
            self.height as f64,
            self.netd_mk,
            self.band_low_um,
            self.band_high_um,
            self.frame_rate_hz,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            bail!(Config, "camera profile fields must be positive and finite: {self:?}");
        }
        if self.band_low_um >= self.band_high_um {
            bail!(
                Config,
                "band_low_um ({}) must be below band_high_um ({})",
                self.band_low_um,
                self.band_high_um
            );
        }
        Ok(())
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.check_keys(&PROFILE_KEYS)?;
        let p = CameraProfile {
            width: kv.require("width")?,
            height: kv.require("height")?,
            netd_mk: kv.require("netd_mk")?,
            band_low_um: kv.require("band_low_um")?,
            band_high_um: kv.require("band_high_um")?,
            frame_rate_hz: kv.require("frame_rate_hz")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_key_values(&KeyValues::load(path)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Warn,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Resolution,
    Netd,
    Band,
    FrameRate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub level: Level,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Warn => "WARN",
            Level::Fail => "FAIL",
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Resolution => "resolution",
            Rule::Netd => "netd",
            Rule::Band => "band",
            Rule::FrameRate => "frame_rate",
        })
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.level, self.rule, self.message)
    }
}

/// Checks a profile against the resolution, NETD, spectral band and frame
/// rate rules. An empty result means fully compliant.
pub fn validate_camera(p: &CameraProfile) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |level, rule, message: String| out.push(Finding { level, rule, message });

    let below = |(w, h): (u32, u32)| p.width < w || p.height < h;
    if below(MIN_RESOLUTION) {
        push(
            Level::Fail,
            Rule::Resolution,
            format!(
                "{}×{} is below the {}×{} minimum",
                p.width, p.height, MIN_RESOLUTION.0, MIN_RESOLUTION.1
            ),
        );
    } else if below(RECOMMENDED_RESOLUTION) {
        push(
            Level::Warn,
            Rule::Resolution,
            format!(
                "{}×{} captures basic features; reliable recognition needs {}×{} or higher",
                p.width, p.height, RECOMMENDED_RESOLUTION.0, RECOMMENDED_RESOLUTION.1
            ),
        );
    }

    if p.netd_mk > MAX_NETD_MK {
        push(
            Level::Fail,
            Rule::Netd,
            format!("NETD {} mK exceeds the {MAX_NETD_MK} mK limit", p.netd_mk),
        );
    } else if p.netd_mk > RECOMMENDED_NETD_MK {
        push(
            Level::Warn,
            Rule::Netd,
            format!(
                "NETD {} mK is above the {RECOMMENDED_NETD_MK} mK recommended for high-precision use",
                p.netd_mk
            ),
        );
    }

    let (lo, hi) = LWIR_BAND_UM;
    if p.band_low_um < lo || p.band_high_um > hi {
        push(
            Level::Fail,
            Rule::Band,
            format!(
                "band {}–{} μm is not within LWIR {lo}–{hi} μm",
                p.band_low_um, p.band_high_um
            ),
        );
    }

    if p.frame_rate_hz < MIN_FRAME_RATE_HZ {
        let mut message = format!(
            "{} Hz is below the {MIN_FRAME_RATE_HZ} Hz needed to avoid motion blur",
            p.frame_rate_hz
        );
        if p.frame_rate_hz <= UNRELIABLE_FRAME_RATE_HZ {
            message.push_str(&format!(
                "; rates of {UNRELIABLE_FRAME_RATE_HZ} Hz or less make dynamic identification unreliable"
            ));
        }
        push(Level::Fail, Rule::FrameRate, message);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(w: u32, h: u32, netd: f64, band: (f64, f64), hz: f64) -> CameraProfile {
        CameraProfile {
            width: w,
            height: h,
            netd_mk: netd,
            band_low_um: band.0,
            band_high_um: band.1,
            frame_rate_hz: hz,
        }
    }

    fn summary(f: &[Finding]) -> Vec<(Level, Rule)> {
        f.iter().map(|x| (x.level, x.rule)).collect()
    }

    #[test]
    fn fully_compliant() {
        assert!(validate_camera(&profile(640, 512, 20.0, (8.0, 14.0), 30.0)).is_empty());
    }

    #[test]
    fn low_resolution_fails() {
        let f = validate_camera(&profile(160, 120, 15.0, (8.0, 14.0), 60.0));
        assert_eq!(summary(&f), vec![(Level::Fail, Rule::Resolution)]);
    }

    #[test]
    fn frame_rate_between_limits_has_no_unreliable_note() {
        let f = validate_camera(&profile(640, 512, 15.0, (8.0, 14.0), 25.0));
        assert_eq!(summary(&f), vec![(Level::Fail, Rule::FrameRate)]);
        assert!(!f[0].message.contains("unreliable"));
    }

    #[test]
    fn profile_parse_and_validation() {
        let kv = KeyValues::parse(
            "width = 640\nheight = 512\nnetd_mk = 25\nband_low_um = 8\nband_high_um = 14\nframe_rate_hz = 30\n",
        )
        .unwrap();
        let p = CameraProfile::from_key_values(&kv).unwrap();
        assert_eq!(p, profile(640, 512, 25.0, (8.0, 14.0), 30.0));

        let bad = KeyValues::parse("width = 640\n").unwrap();
        assert!(CameraProfile::from_key_values(&bad).is_err());
        assert!(profile(640, 512, 25.0, (14.0, 8.0), 30.0).validate().is_err());
        assert!(profile(640, 512, -1.0, (8.0, 14.0), 30.0).validate().is_err());
    }
}
