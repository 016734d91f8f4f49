//! Dense node-embedding store and cosine similarity.
//!
//! Vectors are file inputs (`dim d` header, then `iri<TAB>v1 v2 … vd` per
//! line); the store never trains anything.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::EntityId;

#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<EntityId, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, id: EntityId, vector: Vec<f64>) -> Result<()> {
        if self.dim == 0 {
            self.dim = vector.len();
        }
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for `{id}` has dimension {}, store expects {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("vector for `{id}` has non-finite components")));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &EntityId) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.vectors.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &EntityId> + '_ {
        self.vectors.keys()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src, &path.display().to_string())
    }

    pub fn parse(src: &str, file: &str) -> Result<Self> {
        let mut lines = src.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(file, 1, "missing `dim d` header"))?;
        let dim: usize = header
            .strip_prefix("dim ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::parse(file, 1, format!("bad header `{header}`, expected `dim d`")))?;
        if dim == 0 {
            return Err(Error::parse(file, 1, "dimension must be positive"));
        }
        let mut store = EmbeddingStore::new(dim);
        for (idx, raw) in lines {
            let line_no = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let (iri, rest) = raw
                .split_once('\t')
                .ok_or_else(|| Error::parse(file, line_no, "expected `iri<TAB>components`"))?;
            let vector: Vec<f64> = rest
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(file, line_no, format!("bad component: {e}")))?;
            let id = EntityId::new(iri).map_err(|e| Error::parse(file, line_no, e.to_string()))?;
            store
                .insert(id, vector)
                .map_err(|e| Error::parse(file, line_no, e.to_string()))?;
        }
        Ok(store)
    }
}

/// Cosine similarity in `[-1, 1]`; zero-norm inputs yield 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return 0.0;
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        let src = "dim 3\nurn:a\t1 0 0\nurn:b\t0.5 0.5 0\n";
        let store = EmbeddingStore::parse(src, "<test>").unwrap();
        assert_eq!(store.dim(), 3);
        assert_eq!(store.get(&EntityId::new("urn:a").unwrap()), Some(&[1.0, 0.0, 0.0][..]));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let src = "dim 3\nurn:a\t1 0\n";
        assert!(EmbeddingStore::parse(src, "<test>").is_err());
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]) - 1.0).abs() < 1e-12);
        assert!((cosine_similarity(&[1.0, 0.0], &[0.0, 3.0])).abs() < 1e-12);
        assert!((cosine_similarity(&[1.0, 0.0], &[-2.0, 0.0]) + 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
