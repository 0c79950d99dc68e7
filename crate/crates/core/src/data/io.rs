//! Thermogram files: 16-bit binary PGM or CSV of °C values, each with a
//! `<file>.hdr` sidecar of `key = value` lines (`temp_min`, `temp_max`,
//! `subject_id`, `session_id`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::Thermogram;
use crate::error::{bail, Error, Result};
use crate::kv::KeyValues;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameFormat {
    Pgm16,
    Csv,
}

impl FrameFormat {
    /// Picks the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "pgm" => Ok(FrameFormat::Pgm16),
            Some(ext) if ext == "csv" => Ok(FrameFormat::Csv),
            _ => bail!(
                Format,
                "{}: cannot tell frame format from extension (expected .pgm or .csv)",
                path.display()
            ),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            FrameFormat::Pgm16 => "pgm",
            FrameFormat::Csv => "csv",
        }
    }
}

impl std::str::FromStr for FrameFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pgm16" => Ok(FrameFormat::Pgm16),
            "csv" => Ok(FrameFormat::Csv),
            other => Err(format!("unknown frame format {other:?} (expected pgm16 or csv)")),
        }
    }
}

impl std::fmt::Display for FrameFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FrameFormat::Pgm16 => "pgm16",
            FrameFormat::Csv => "csv",
        })
    }
}

/// `<frame>.hdr`, next to the frame.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(".hdr");
    PathBuf::from(s)
}

/// Sidecar metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sidecar {
    pub temp_range: Option<(f64, f64)>,
    pub subject_id: Option<String>,
    pub session_id: Option<String>,
}

impl Sidecar {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_keys(&["temp_min", "temp_max", "subject_id", "session_id"])
            .map_err(|e| Error::Format(e.to_string()))?;
        let num = |key: &str| -> Result<Option<f64>> {
            kv.get_parsed(key).map_err(|e| Error::Format(e.to_string()))
        };
        let temp_range = match (num("temp_min")?, num("temp_max")?) {
            (Some(lo), Some(hi)) if lo.is_finite() && hi.is_finite() && lo < hi => Some((lo, hi)),
            (None, None) => None,
            (lo, hi) => bail!(Format, "invalid temperature range temp_min={lo:?} temp_max={hi:?}"),
        };
        Ok(Sidecar {
            temp_range,
            subject_id: kv.get("subject_id").map(str::to_string),
            session_id: kv.get("session_id").map(str::to_string),
        })
    }

    pub fn render(&self) -> String {
        let mut kv = KeyValues::new();
        if let Some((lo, hi)) = self.temp_range {
            kv.set("temp_min", lo.to_string());
            kv.set("temp_max", hi.to_string());
        }
        if let Some(s) = &self.subject_id {
            kv.set("subject_id", s.clone());
        }
        if let Some(s) = &self.session_id {
            kv.set("session_id", s.clone());
        }
        kv.render()
    }
}

fn read_sidecar(path: &Path, required: bool) -> Result<Sidecar> {
    let side = sidecar_path(path);
    match std::fs::read_to_string(&side) {
        Ok(text) => Sidecar::parse(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", side.display())),
            other => other,
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && !required => Ok(Sidecar::default()),
        Err(e) => Err(Error::io(side, e)),
    }
}

/// Parses a CSV raster of °C values. Errors name the offending line.
pub fn parse_csv_raster(text: &str) -> Result<Thermogram> {
    let mut width = None;
    let mut pixels = Vec::new();
    let mut height = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = pixels.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("line {}: cannot parse {field:?}", n + 1)))?;
            if !v.is_finite() {
                bail!(Data, "line {}: non-finite temperature {field:?}", n + 1);
            }
            pixels.push(v);
        }
        let row = pixels.len() - before;
        match width {
            None => width = Some(row),
            Some(w) if w != row => bail!(Format, "line {}: {row} values, expected {w}", n + 1),
            _ => {}
        }
        height += 1;
    }
    let Some(width) = width else {
        bail!(Format, "empty CSV raster");
    };
    Thermogram::new(width, height, pixels)
}

/// Raw samples of a binary (`P5`) PGM with a 16-bit maxval.
pub fn parse_pgm16(bytes: &[u8]) -> Result<(usize, usize, u16, Vec<u16>)> {
    let mut pos = 0;
    let mut token = |name: &str| -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            bail!(Format, "offset {start}: missing {name}");
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token("magic")?;
    if magic != "P5" {
        bail!(Format, "offset 0: expected P5 magic, found {magic:?}");
    }
    let mut number = |name: &str| -> Result<usize> {
        let t = token(name)?;
        t.parse()
            .map_err(|_| Error::Format(format!("header {name}: cannot parse {t:?}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 {
        bail!(Format, "header: zero dimension {width}×{height}");
    }
    if !(256..=65535).contains(&maxval) {
        bail!(Format, "header maxval: {maxval} is not a 16-bit PGM");
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data_start = pos + 1;
    let needed = width * height * 2;
    let available = bytes.len().saturating_sub(data_start);
    if available < needed {
        bail!(
            Format,
            "offset {data_start}: raster truncated, need {needed} bytes, have {available}"
        );
    }
    if available > needed {
        bail!(Format, "offset {}: {} trailing bytes", data_start + needed, available - needed);
    }
    let samples: Vec<u16> = bytes[data_start..]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    if let Some(i) = samples.iter().position(|&s| s as usize > maxval) {
        bail!(Format, "offset {}: sample {} exceeds maxval {maxval}", data_start + 2 * i, samples[i]);
    }
    Ok((width, height, maxval as u16, samples))
}

pub fn encode_pgm16(width: usize, height: usize, samples: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(samples.len() * 2);
    for s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

/// Reads a thermogram and its sidecar. PGM samples map linearly from
/// `[0, maxval]` onto the sidecar's `[temp_min, temp_max]`.
pub fn load_thermogram(path: impl AsRef<Path>, format: FrameFormat) -> Result<Thermogram> {
    let path = path.as_ref();
    let with_path = |e: Error| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    };
    let mut t = match format {
        FrameFormat::Csv => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let t = parse_csv_raster(&text).map_err(with_path)?;
            let side = read_sidecar(path, false)?;
            (t, side)
        }
        FrameFormat::Pgm16 => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let side = read_sidecar(path, true)?;
            let Some((lo, hi)) = side.temp_range else {
                return Err(Error::Format(format!(
                    "{}: sidecar lacks temp_min/temp_max",
                    sidecar_path(path).display()
                )));
            };
            let (w, h, maxval, samples) = parse_pgm16(&bytes).map_err(with_path)?;
            let scale = (hi - lo) / f64::from(maxval);
            let pixels = samples.iter().map(|&s| lo + f64::from(s) * scale).collect();
            (Thermogram::new(w, h, pixels).map_err(with_path)?, side)
        }
    };
    t.0.subject_id = t.1.subject_id.take();
    t.0.session_id = t.1.session_id.take();
    Ok(t.0)
}

/// Writes a thermogram and its sidecar. PGM output quantizes onto
/// `pgm_range`, clamping values outside it.
pub fn save_thermogram(
    t: &Thermogram,
    path: impl AsRef<Path>,
    format: FrameFormat,
    pgm_range: (f64, f64),
) -> Result<()> {
    let path = path.as_ref();
    let mut side = Sidecar {
        temp_range: None,
        subject_id: t.subject_id.clone(),
        session_id: t.session_id.clone(),
    };
    let body = match format {
        FrameFormat::Csv => {
            let mut s = String::new();
            for row in t.pixels().chunks_exact(t.width()) {
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    write!(s, "{v}").unwrap();
                }
                s.push('\n');
            }
            s.into_bytes()
        }
        FrameFormat::Pgm16 => {
            let (lo, hi) = pgm_range;
            if !(lo < hi) {
                bail!(Config, "PGM temperature range must satisfy min < max");
            }
            side.temp_range = Some((lo, hi));
            let samples: Vec<u16> = t
                .pixels()
                .iter()
                .map(|&v| ((v - lo) / (hi - lo) * 65535.0).round().clamp(0.0, 65535.0) as u16)
                .collect();
            encode_pgm16(t.width(), t.height(), &samples)
        }
    };
    std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    let side_path = sidecar_path(path);
    std::fs::write(&side_path, side.render()).map_err(|e| Error::io(side_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_two_by_two() {
        let t = parse_csv_raster("30,31\n32,33").unwrap();
        assert_eq!((t.width(), t.height()), (2, 2));
        assert_eq!(t.pixels(), &[30.0, 31.0, 32.0, 33.0]);
    }

    #[test]
    fn csv_nan_is_data_error() {
        assert!(matches!(parse_csv_raster("30,NaN\n1,2"), Err(Error::Data(_))));
    }

    #[test]
    fn csv_errors_name_line() {
        let e = parse_csv_raster("1,2\n3\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = parse_csv_raster("1,2\n3,x\n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(matches!(parse_csv_raster("200,1"), Err(Error::Data(_))));
    }

    #[test]
    fn pgm_zeros_map_to_range_low() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.pgm");
        std::fs::write(&path, encode_pgm16(3, 2, &[0; 6])).unwrap();
        std::fs::write(sidecar_path(&path), "temp_min = 20\ntemp_max = 40\nsubject_id = A\n").unwrap();
        let t = load_thermogram(&path, FrameFormat::Pgm16).unwrap();
        assert!(t.pixels().iter().all(|&v| v == 20.0));
        assert_eq!(t.subject_id.as_deref(), Some("A"));
    }

    #[test]
    fn pgm_requires_sidecar_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.pgm");
        std::fs::write(&path, encode_pgm16(1, 1, &[65535])).unwrap();
        assert!(matches!(load_thermogram(&path, FrameFormat::Pgm16), Err(Error::Io { .. })));
        std::fs::write(sidecar_path(&path), "subject_id = A\n").unwrap();
        assert!(matches!(load_thermogram(&path, FrameFormat::Pgm16), Err(Error::Format(_))));
    }

    #[test]
    fn pgm_truncated_names_offset() {
        let mut bytes = encode_pgm16(2, 2, &[1, 2, 3, 4]);
        bytes.pop();
        let e = parse_pgm16(&bytes).unwrap_err().to_string();
        assert!(e.contains("offset"), "{e}");
        assert!(parse_pgm16(b"P2\n1 1\n65535\n\0\0").is_err());
    }

    #[test]
    fn pgm_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let t = Thermogram::new(2, 2, vec![21.5, 34.25, 30.0, 22.0])
            .unwrap()
            .with_labels("id001", "stream-00");
        save_thermogram(&t, &path, FrameFormat::Pgm16, (10.0, 50.0)).unwrap();
        let back = load_thermogram(&path, FrameFormat::Pgm16).unwrap();
        for (a, b) in t.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 40.0 / 65535.0);
        }
        assert_eq!(back.session_id.as_deref(), Some("stream-00"));
    }

    #[test]
    fn csv_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let t = Thermogram::new(3, 1, vec![21.123456789, 34.0, -3.5]).unwrap();
        save_thermogram(&t, &path, FrameFormat::Csv, (0.0, 1.0)).unwrap();
        assert_eq!(load_thermogram(&path, FrameFormat::Csv).unwrap(), t);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(FrameFormat::from_path(Path::new("a/b.PGM")).unwrap(), FrameFormat::Pgm16);
        assert_eq!(FrameFormat::from_path(Path::new("b.csv")).unwrap(), FrameFormat::Csv);
        assert!(FrameFormat::from_path(Path::new("b.png")).is_err());
    }
}
