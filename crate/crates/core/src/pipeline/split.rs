//! Document-level stratified splitting.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::annotate::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl DatasetSplit {
    pub fn of(&self, doc_id: &str) -> &'static str {
        if self.train.contains(doc_id) {
            "train"
        } else if self.validation.contains(doc_id) {
            "validation"
        } else if self.test.contains(doc_id) {
            "test"
        } else {
            "none"
        }
    }

    pub fn select<'a>(&self, docs: &'a [Document], part: &str) -> Vec<&'a Document> {
        docs.iter()
            .filter(|d| part == "all" || self.of(&d.id) == part)
            .collect()
    }
}

/// Splits documents into train/validation/test by the given fractions,
/// stratifying on the number of ground-truth locations (buckets 0, 1, 2+)
/// so the location totals stay balanced across parts. The split operates at
/// the document level; a document's locations never straddle parts.
/// Validation and test sizes are rounded per stratum, the remainder goes to
/// train. Deterministic for a fixed seed.
pub fn stratified_split(
    docs: &[Document],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let (f_train, f_val, f_test) = fractions;
    if f_train < 0.0 || f_val < 0.0 || f_test < 0.0 {
        return Err(Error::invalid("split fractions must be non-negative"));
    }
    if (f_train + f_val + f_test - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions must sum to 1"));
    }
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    for d in docs {
        if !ids.insert(&d.id) {
            return Err(Error::invalid(format!("duplicate document id `{}`", d.id)));
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut split = DatasetSplit::default();
    for bucket in 0..3usize {
        let mut members: Vec<&str> = docs
            .iter()
            .filter(|d| d.ground_truth.len().min(2) == bucket)
            .map(|d| d.id.as_str())
            .collect();
        members.sort_unstable();
        members.shuffle(&mut rng);
        let n = members.len();
        let n_val = (n as f64 * f_val).round() as usize;
        let n_test = ((n as f64 * f_test).round() as usize).min(n - n_val.min(n));
        let n_val = n_val.min(n - n_test);
        let n_train = n - n_val - n_test;
        for (i, id) in members.into_iter().enumerate() {
            let part = if i < n_train {
                &mut split.train
            } else if i < n_train + n_val {
                &mut split.validation
            } else {
                &mut split.test
            };
            part.insert(id.to_string());
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::GroundTruthLocation;
    use crate::kg::GeoCoordinate;

    fn docs_with_counts(counts: &[usize]) -> Vec<Document> {
        counts
            .iter()
            .enumerate()
            .map(|(i, n)| Document {
                id: format!("d{i:04}"),
                text: "text".into(),
                ground_truth: (0..*n)
                    .map(|k| GroundTruthLocation {
                        coordinate: GeoCoordinate::new(k as f64, k as f64).unwrap(),
                        entity: None,
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn single_stratum_splits_64_16_20() {
        let docs = docs_with_counts(&vec![0; 100]);
        let split = stratified_split(&docs, (0.64, 0.16, 0.20), 1).unwrap();
        assert_eq!(split.train.len(), 64);
        assert_eq!(split.validation.len(), 16);
        assert_eq!(split.test.len(), 20);
    }

    #[test]
    fn skewed_strata_stay_within_one_document_of_quota() {
        // Location-count profile scaled to 1000 documents: 854 / 101 / 45.
        let mut counts = vec![0usize; 854];
        counts.extend(vec![1usize; 101]);
        counts.extend(vec![2usize; 45]);
        let docs = docs_with_counts(&counts);
        let split = stratified_split(&docs, (0.64, 0.16, 0.20), 9).unwrap();
        for (stratum, n) in [(0usize, 854usize), (1, 101), (2, 45)] {
            let in_part = |part: &BTreeSet<String>| {
                docs.iter()
                    .filter(|d| d.ground_truth.len().min(2) == stratum && part.contains(&d.id))
                    .count() as f64
            };
            let n = n as f64;
            assert!((in_part(&split.train) - 0.64 * n).abs() <= 1.0);
            assert!((in_part(&split.validation) - 0.16 * n).abs() <= 1.0);
            assert!((in_part(&split.test) - 0.20 * n).abs() <= 1.0);
        }
        // Parts partition the dataset.
        assert_eq!(
            split.train.len() + split.validation.len() + split.test.len(),
            docs.len()
        );
        assert!(split.train.is_disjoint(&split.validation));
        assert!(split.train.is_disjoint(&split.test));
        assert!(split.validation.is_disjoint(&split.test));
    }

    #[test]
    fn same_seed_reproduces_the_split() {
        let docs = docs_with_counts(&[0, 0, 0, 1, 1, 2, 2, 0, 1, 2, 0, 0]);
        let a = stratified_split(&docs, (0.64, 0.16, 0.20), 77).unwrap();
        let b = stratified_split(&docs, (0.64, 0.16, 0.20), 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(stratified_split(&[], (0.64, 0.16, 0.20), 0).is_err());
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let docs = docs_with_counts(&[0, 1]);
        assert!(stratified_split(&docs, (0.5, 0.2, 0.2), 0).is_err());
    }
}
