use rand::seq::SliceRandom;

use super::DatasetManifest;
use crate::error::{bail, Error, Result};
use crate::kv::KeyValues;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMode {
    /// Images are shuffled and cut independently of identity.
    ByImage,
    /// Subjects are shuffled and cut; every image follows its subject.
    ByIdentity,
}

impl std::str::FromStr for SplitMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "by_image" => Ok(SplitMode::ByImage),
            "by_identity" => Ok(SplitMode::ByIdentity),
            other => Err(format!("unknown split mode {other:?}")),
        }
    }
}

impl std::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitMode::ByImage => "by_image",
            SplitMode::ByIdentity => "by_identity",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            mode: SplitMode::ByIdentity,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Config-file keys understood by [`SplitSpec::from_key_values`].
pub const SPLIT_KEYS: [&str; 3] = ["split_mode", "train_fraction", "seed"];

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!(Config, "train_fraction must lie in (0, 1), got {}", self.train_fraction);
        }
        Ok(())
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = SplitSpec::default();
        let mode = match kv.get("split_mode") {
            None => d.mode,
            Some(raw) => raw.parse().map_err(|e: String| Error::Config(format!("key `split_mode`: {e}")))?,
        };
        let spec = SplitSpec {
            mode,
            train_fraction: kv.get_or("train_fraction", d.train_fraction)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("split_mode", self.mode.to_string());
        kv.set("train_fraction", self.train_fraction.to_string());
        kv.set("seed", self.seed.to_string());
        kv
    }
}

/// `floor(fraction · n)`, tolerant of the representation error in products
/// such as `0.8 · 3720`.
fn cut_point(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Partitions indices `0..labels.len()` into sorted train and test index
/// lists.
pub fn split_indices(labels: &[&str], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[rng::SPLIT]);
    let (mut train, mut test) = match spec.mode {
        SplitMode::ByImage => {
            let mut order: Vec<usize> = (0..labels.len()).collect();
            order.shuffle(&mut rng);
            let cut = cut_point(spec.train_fraction, order.len());
            let test = order.split_off(cut);
            (order, test)
        }
        SplitMode::ByIdentity => {
            let mut subjects: Vec<&str> = Vec::new();
            for &l in labels {
                if !subjects.contains(&l) {
                    subjects.push(l);
                }
            }
            if subjects.len() < 2 {
                bail!(Config, "by_identity split needs at least 2 subjects, got {}", subjects.len());
            }
            subjects.shuffle(&mut rng);
            let cut = cut_point(spec.train_fraction, subjects.len());
            let train_subjects = &subjects[..cut];
            (0..labels.len()).partition(|&i| train_subjects.contains(&labels[i]))
        }
    };
    if train.is_empty() || test.is_empty() {
        bail!(
            Config,
            "split of {} items at {} leaves an empty partition ({} train / {} test)",
            labels.len(),
            spec.train_fraction,
            train.len(),
            test.len()
        );
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_dataset(manifest: &DatasetManifest, spec: &SplitSpec) -> Result<(DatasetManifest, DatasetManifest)> {
    let (train, test) = split_indices(&manifest.labels(), spec)?;
    Ok((manifest.subset(&train), manifest.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(subjects: usize, per: usize) -> Vec<String> {
        (0..subjects * per).map(|i| format!("s{}", i / per)).collect()
    }

    #[test]
    fn key_values_round_trip() {
        let spec = SplitSpec { mode: SplitMode::ByImage, train_fraction: 0.75, seed: 9 };
        assert_eq!(SplitSpec::from_key_values(&spec.to_key_values()).unwrap(), spec);
        let bad = KeyValues::parse("split_mode = by_session").unwrap();
        assert!(matches!(SplitSpec::from_key_values(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn by_image_counts() {
        let l = labels(10, 10);
        let refs: Vec<&str> = l.iter().map(String::as_str).collect();
        let spec = SplitSpec {
            mode: SplitMode::ByImage,
            ..SplitSpec::default()
        };
        let (tr, te) = split_indices(&refs, &spec).unwrap();
        assert_eq!((tr.len(), te.len()), (80, 20));
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let l = labels(8, 5);
        let refs: Vec<&str> = l.iter().map(String::as_str).collect();
        let spec = SplitSpec::default();
        assert_eq!(split_indices(&refs, &spec).unwrap(), split_indices(&refs, &spec).unwrap());
        let other = SplitSpec { seed: 99, ..spec };
        assert_ne!(split_indices(&refs, &spec).unwrap(), split_indices(&refs, &other).unwrap());
    }

    #[test]
    fn empty_partition_rejected() {
        let refs = ["a", "b", "c"];
        let spec = SplitSpec {
            mode: SplitMode::ByImage,
            train_fraction: 0.2,
            seed: 0,
        };
        assert!(matches!(split_indices(&refs, &spec), Err(Error::Config(_))));
        let one = ["a", "a"];
        assert!(split_indices(&one, &SplitSpec::default()).is_err());
    }

    #[test]
    fn bad_fraction() {
        let spec = SplitSpec {
            train_fraction: 1.0,
            ..SplitSpec::default()
        };
        assert!(split_indices(&["a", "b"], &spec).is_err());
    }
}
