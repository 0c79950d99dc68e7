use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{bail, Result};
use crate::rng;

/// Two dataset indices and whether they share a subject.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairSample {
    pub index_a: usize,
    pub index_b: usize,
    pub is_same: bool,
}

/// Draws `n_pairs` pairs alternating same-subject and different-subject,
/// starting with a same pair, so the two kinds differ by at most one.
///
/// Same pairs pick a subject uniformly among those with at least two images
/// and then two distinct images of it. Different pairs pick two distinct
/// subjects uniformly and one image of each.
pub fn make_pairs(labels: &[&str], n_pairs: usize, seed: u64) -> Result<Vec<PairSample>> {
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match groups.iter_mut().find(|(s, _)| *s == l) {
            Some((_, v)) => v.push(i),
            None => groups.push((l, vec![i])),
        }
    }
    let multi: Vec<&Vec<usize>> = groups.iter().map(|(_, v)| v).filter(|v| v.len() >= 2).collect();
    if groups.len() < 2 {
        bail!(Data, "pairing needs at least two subjects, got {}", groups.len());
    }
    if multi.is_empty() {
        bail!(Data, "pairing needs a subject with at least two images");
    }

    let mut rng = rng::stream(seed, &[rng::PAIRS]);
    let mut out = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let sample = if k % 2 == 0 {
            let group = multi[rng.gen_range(0..multi.len())];
            let mut two = group.choose_multiple(&mut rng, 2);
            let (a, b) = (*two.next().unwrap(), *two.next().unwrap());
            PairSample {
                index_a: a,
                index_b: b,
                is_same: true,
            }
        } else {
            let ga = rng.gen_range(0..groups.len());
            let mut gb = rng.gen_range(0..groups.len() - 1);
            if gb >= ga {
                gb += 1;
            }
            PairSample {
                index_a: *groups[ga].1.choose(&mut rng).unwrap(),
                index_b: *groups[gb].1.choose(&mut rng).unwrap(),
                is_same: false,
            }
        };
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::Error;

    #[test]
    fn small_exhaustive_case() {
        let labels = ["A", "A", "B", "B"];
        let pairs = make_pairs(&labels, 4, 1).unwrap();
        assert_eq!(pairs.iter().filter(|p| p.is_same).count(), 2);
        assert_eq!(pairs.iter().filter(|p| !p.is_same).count(), 2);
        for p in &pairs {
            assert_ne!(p.index_a, p.index_b);
            assert_eq!(p.is_same, labels[p.index_a] == labels[p.index_b]);
        }
    }

    #[test]
    fn single_subject_is_data_error() {
        assert!(matches!(make_pairs(&["A", "A", "A"], 4, 0), Err(Error::Data(_))));
        assert!(matches!(make_pairs(&["A", "B"], 4, 0), Err(Error::Data(_))));
    }

    #[test]
    fn deterministic() {
        let labels = ["A", "B", "A", "C", "B", "C", "C"];
        assert_eq!(make_pairs(&labels, 30, 5).unwrap(), make_pairs(&labels, 30, 5).unwrap());
        assert_ne!(make_pairs(&labels, 30, 5).unwrap(), make_pairs(&labels, 30, 6).unwrap());
    }

    proptest! {
        #[test]
        fn pairs_are_balanced_and_valid(
            raw in proptest::collection::vec(0u8..5, 2..40),
            n in 0usize..200,
            seed in any::<u64>(),
        ) {
            let names: Vec<String> = raw.iter().map(|s| format!("s{s}")).collect();
            let labels: Vec<&str> = names.iter().map(String::as_str).collect();
            match make_pairs(&labels, n, seed) {
                Ok(pairs) => {
                    prop_assert_eq!(pairs.len(), n);
                    let same = pairs.iter().filter(|p| p.is_same).count() as i64;
                    prop_assert!((same - (n as i64 - same)).abs() <= 1);
                    for p in &pairs {
                        prop_assert_ne!(p.index_a, p.index_b);
                        prop_assert_eq!(p.is_same, labels[p.index_a] == labels[p.index_b]);
                    }
                }
                Err(_) => {
                    let mut distinct = labels.clone();
                    distinct.sort();
                    distinct.dedup();
                    prop_assert!(distinct.len() < 2 || distinct.len() == labels.len());
                }
            }
        }
    }
}
