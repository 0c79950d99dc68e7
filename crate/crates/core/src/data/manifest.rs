use std::path::{Path, PathBuf};

use super::io::{load_thermogram, FrameFormat};
use super::Thermogram;
use crate::error::{bail, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum FrameSource {
    File(PathBuf),
    Memory(Box<Thermogram>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub source: FrameSource,
    pub subject_id: String,
    pub session_id: String,
}

/// Ordered list of labelled frames, on disk or in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

const HEADER: [&str; 3] = ["path", "subject_id", "session_id"];

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|e| e.subject_id.trim().is_empty()) {
            bail!(Data, "manifest entry {i} has an empty subject_id");
        }
        Ok(DatasetManifest { entries })
    }

    /// Wraps in-memory thermograms; each must carry a subject label.
    pub fn from_thermograms(frames: Vec<Thermogram>) -> Result<Self> {
        let entries = frames
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let subject_id = t
                    .subject_id
                    .clone()
                    .ok_or_else(|| Error::Data(format!("frame {i} has no subject_id")))?;
                let session_id = t.session_id.clone().unwrap_or_default();
                Ok(ManifestEntry {
                    source: FrameSource::Memory(Box::new(t)),
                    subject_id,
                    session_id,
                })
            })
            .collect::<Result<_>>()?;
        DatasetManifest::new(entries)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.subject_id.as_str()).collect()
    }

    /// Distinct subjects in order of first appearance.
    pub fn subjects(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for e in &self.entries {
            if !seen.contains(&e.subject_id.as_str()) {
                seen.push(e.subject_id.as_str());
            }
        }
        seen
    }

    pub fn subset(&self, indices: &[usize]) -> DatasetManifest {
        DatasetManifest {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }

    /// Loads frame `i`, labelled from the manifest. Errors name the manifest
    /// row (1-based, header excluded).
    pub fn load(&self, i: usize) -> Result<Thermogram> {
        let entry = self
            .entries
            .get(i)
            .ok_or_else(|| Error::Contract(format!("manifest has no entry {i}")))?;
        let row = |e: Error| match e {
            Error::Data(m) => Error::Data(format!("manifest row {}: {m}", i + 1)),
            Error::Format(m) => Error::Format(format!("manifest row {}: {m}", i + 1)),
            other => other,
        };
        let mut t = match &entry.source {
            FrameSource::Memory(t) => (**t).clone(),
            FrameSource::File(path) => {
                let format = FrameFormat::from_path(path).map_err(row)?;
                load_thermogram(path, format).map_err(row)?
            }
        };
        t.subject_id = Some(entry.subject_id.clone());
        t.session_id = Some(entry.session_id.clone());
        Ok(t)
    }

    pub fn load_all(&self) -> Result<Vec<Thermogram>> {
        (0..self.len()).map(|i| self.load(i)).collect()
    }

    /// Reads a `path,subject_id,session_id` CSV. Relative paths resolve
    /// against the manifest's directory.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| Error::Format(format!("{}: header: {e}", path.display())))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            bail!(
                Format,
                "{}: header must be {}, got {}",
                path.display(),
                HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            );
        }
        let mut entries = Vec::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), n + 1)))?;
            let frame = PathBuf::from(&rec[0]);
            if rec[1].is_empty() {
                bail!(Data, "{}: row {}: empty subject_id", path.display(), n + 1);
            }
            entries.push(ManifestEntry {
                source: FrameSource::File(if frame.is_absolute() { frame } else { base.join(frame) }),
                subject_id: rec[1].to_string(),
                session_id: rec[2].to_string(),
            });
        }
        DatasetManifest::new(entries)
    }

    /// Writes the manifest as CSV with frame paths relative to the
    /// manifest's directory, so a dataset directory can be moved as a whole.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let base = std::path::absolute(base).map_err(|e| Error::io(base, e))?;
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).map_err(fmt)?;
        for (i, e) in self.entries.iter().enumerate() {
            let FrameSource::File(frame) = &e.source else {
                bail!(Config, "entry {i} is in memory and cannot be written to a manifest");
            };
            let frame = std::path::absolute(frame).map_err(|e| Error::io(frame, e))?;
            let shown = pathdiff::diff_paths(&frame, &base).unwrap_or(frame);
            w.write_record([shown.to_string_lossy().as_ref(), &e.subject_id, &e.session_id])
                .map_err(fmt)?;
        }
        let out = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}
