//! Open-set enrollment and matching against stored reference embeddings.
//!
//! A gallery is bound to the model that produced its embeddings through the
//! SHA-256 fingerprint of the serialized model. Readers (`verify`,
//! `identify`) take `&self`; `enroll` needs `&mut self`.

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::data::{preprocess, Thermogram};
use crate::error::{bail, Error, Result};
use crate::model::{euclidean_distance, Embedding, ModelParams};

pub const GALLERY_MAGIC: &[u8; 4] = b"TVG1";

/// How a probe is compared with a subject's enrolled embeddings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatchRule {
    /// Minimum distance over the subject's embeddings.
    #[default]
    Nearest,
    /// Distance to the mean of the subject's embeddings.
    Centroid,
}

impl std::str::FromStr for MatchRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nearest" => Ok(MatchRule::Nearest),
            "centroid" => Ok(MatchRule::Centroid),
            other => Err(format!("unknown match rule {other:?}")),
        }
    }
}

impl std::fmt::Display for MatchRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MatchRule::Nearest => "nearest",
            MatchRule::Centroid => "centroid",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gallery {
    /// `None` until the first enrollment.
    fingerprint: Option<[u8; 32]>,
    entries: BTreeMap<String, Vec<Embedding>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verification {
    pub accepted: bool,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Identification {
    /// The matched subject, or `None` for an unknown probe.
    pub subject: Option<String>,
    /// Distance to the closest subject, matched or not.
    pub distance: f64,
}

fn embed_probe(params: &ModelParams, probe: &Thermogram) -> Result<Embedding> {
    params.embed(&preprocess(probe, params.config().input_size)?)
}

impl Gallery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fingerprint(&self) -> Option<&[u8; 32]> {
        self.fingerprint.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn subject_count(&self) -> usize {
        self.entries.len()
    }

    pub fn embeddings(&self, subject_id: &str) -> Option<&[Embedding]> {
        self.entries.get(subject_id).map(Vec::as_slice)
    }

    pub fn subjects(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn check_model(&self, params: &ModelParams) -> Result<()> {
        match &self.fingerprint {
            Some(fp) if *fp != params.fingerprint() => bail!(
                Compatibility,
                "gallery was built with model {}, not {}",
                hex(fp),
                hex(&params.fingerprint())
            ),
            _ => Ok(()),
        }
    }

    /// Appends embeddings of `probes` under `subject_id`. On error the
    /// gallery is unchanged.
    pub fn enroll(&mut self, subject_id: &str, probes: &[Thermogram], params: &ModelParams) -> Result<()> {
        if subject_id.is_empty() {
            bail!(Contract, "subject_id must be non-empty");
        }
        if probes.is_empty() {
            bail!(Contract, "enrollment of {subject_id} needs at least one probe");
        }
        self.check_model(params)?;
        let new = probes
            .iter()
            .map(|p| embed_probe(params, p))
            .collect::<Result<Vec<_>>>()?;
        self.fingerprint = Some(params.fingerprint());
        self.entries.entry(subject_id.to_string()).or_default().extend(new);
        Ok(())
    }

    fn subject_distance(&self, embeddings: &[Embedding], probe: &Embedding, rule: MatchRule) -> Result<f64> {
        match rule {
            MatchRule::Nearest => embeddings
                .iter()
                .map(|e| euclidean_distance(e, probe))
                .try_fold(f64::INFINITY, |m, d| d.map(|d| m.min(d))),
            MatchRule::Centroid => {
                let dim = probe.len();
                let mut mean = vec![0.0; dim];
                for e in embeddings {
                    for (m, v) in mean.iter_mut().zip(e.values()) {
                        *m += v;
                    }
                }
                let n = embeddings.len() as f64;
                mean.iter_mut().for_each(|m| *m /= n);
                euclidean_distance(&Embedding::new(mean)?, probe)
            }
        }
    }

    /// 1:1 check of `probe` against one enrolled subject.
    pub fn verify(
        &self,
        subject_id: &str,
        probe: &Thermogram,
        params: &ModelParams,
        tau: f64,
        rule: MatchRule,
    ) -> Result<Verification> {
        let Some(embeddings) = self.entries.get(subject_id) else {
            bail!(NotEnrolled, "subject {subject_id:?} is not enrolled");
        };
        self.check_model(params)?;
        let e = embed_probe(params, probe)?;
        let distance = self.subject_distance(embeddings, &e, rule)?;
        Ok(Verification {
            accepted: distance <= tau,
            distance,
        })
    }

    /// 1:N search with open-set rejection. Equal distances resolve to the
    /// lexicographically smallest subject id.
    pub fn identify(&self, probe: &Thermogram, params: &ModelParams, tau: f64, rule: MatchRule) -> Result<Identification> {
        if self.entries.is_empty() {
            bail!(NotEnrolled, "gallery is empty");
        }
        self.check_model(params)?;
        let e = embed_probe(params, probe)?;
        let mut best: Option<(&str, f64)> = None;
        for (subject, embeddings) in &self.entries {
            let d = self.subject_distance(embeddings, &e, rule)?;
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((subject, d));
            }
        }
        let (subject, distance) = best.expect("non-empty gallery");
        Ok(Identification {
            subject: (distance <= tau).then(|| subject.to_string()),
            distance,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(GALLERY_MAGIC);
        out.extend_from_slice(&self.fingerprint.unwrap_or([0; 32]));
        let dim = self.entries.values().flatten().next().map_or(0, Embedding::len);
        out.write_u32::<LE>(dim as u32).unwrap();
        out.write_u32::<LE>(self.entries.len() as u32).unwrap();
        for (subject, embeddings) in &self.entries {
            out.write_u32::<LE>(subject.len() as u32).unwrap();
            out.extend_from_slice(subject.as_bytes());
            out.write_u32::<LE>(embeddings.len() as u32).unwrap();
            for e in embeddings {
                for &v in e.values() {
                    out.write_f64::<LE>(v).unwrap();
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor::new(bytes);
        let trunc = |field: &str| Error::Format(format!("gallery field `{field}`: file truncated"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| trunc("magic"))?;
        if &magic != GALLERY_MAGIC {
            bail!(Format, "gallery field `magic`: expected TVG1, found {magic:?}");
        }
        let mut fingerprint = [0u8; 32];
        r.read_exact(&mut fingerprint).map_err(|_| trunc("fingerprint"))?;
        let dim = r.read_u32::<LE>().map_err(|_| trunc("dim"))? as usize;
        let n_subjects = r.read_u32::<LE>().map_err(|_| trunc("subject_count"))?;
        let remaining = |r: &Cursor<&[u8]>| bytes.len() - r.position() as usize;
        let mut entries = BTreeMap::new();
        for i in 0..n_subjects {
            let len = r.read_u32::<LE>().map_err(|_| trunc("subject_id length"))? as usize;
            if len == 0 || len > remaining(&r) {
                bail!(Format, "gallery subject {i}: invalid id length {len}");
            }
            let mut name = vec![0u8; len];
            r.read_exact(&mut name).map_err(|_| trunc("subject_id"))?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Format(format!("gallery subject {i}: id is not UTF-8")))?;
            let count = r.read_u32::<LE>().map_err(|_| trunc("embedding_count"))? as usize;
            if count == 0 || dim == 0 || count.saturating_mul(dim).saturating_mul(8) > remaining(&r) {
                bail!(Format, "gallery subject {name:?}: {count} embeddings of dimension {dim} do not fit the file");
            }
            let mut embeddings = Vec::with_capacity(count);
            for _ in 0..count {
                let mut v = vec![0.0; dim];
                r.read_f64_into::<LE>(&mut v).map_err(|_| trunc("embedding"))?;
                embeddings.push(Embedding::new(v).map_err(|e| Error::Format(e.to_string()))?);
            }
            if entries.insert(name.clone(), embeddings).is_some() {
                bail!(Format, "gallery subject {name:?} appears twice");
            }
        }
        if remaining(&r) != 0 {
            bail!(Format, "gallery: {} trailing bytes", remaining(&r));
        }
        Ok(Gallery {
            fingerprint: (!entries.is_empty()).then_some(fingerprint),
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
