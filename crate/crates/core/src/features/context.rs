//! Contextual vectors for the anchor-vs-candidate similarity feature.
//!
//! The faithful route loads precomputed contextual vectors from files: one
//! file keyed by anchor span for the document side, one keyed by entity IRI
//! for the candidate side (the vector of the first mention of the entity
//! name in its abstract). When no files are supplied, a deterministic
//! fallback embeds both sides as an L2-normalized hashed character-trigram
//! bag over the mention plus a ±5-token window. The fallback is a stand-in
//! for contextual language-model vectors, not a reproduction of them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::annotate::{Annotation, Document};
use crate::embed::{cosine_similarity, EmbeddingStore};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::text;

/// Dimension of the fallback trigram space.
pub const TRIGRAM_DIM: usize = 128;

/// Tokens of context kept on each side of a mention.
const WINDOW_TOKENS: usize = 5;

#[derive(Debug, Clone, Default)]
pub struct ContextVectors {
    anchors: BTreeMap<(String, usize, usize), Vec<f64>>,
    entity_mentions: BTreeMap<EntityId, Vec<f64>>,
}

impl ContextVectors {
    pub fn anchor(&self, document_id: &str, span: (usize, usize)) -> Option<&[f64]> {
        self.anchors
            .get(&(document_id.to_string(), span.0, span.1))
            .map(Vec::as_slice)
    }

    pub fn entity_mention(&self, id: &EntityId) -> Option<&[f64]> {
        self.entity_mentions.get(id).map(Vec::as_slice)
    }

    /// Cosine similarity between the anchor's contextual vector and the
    /// candidate's abstract-mention vector; 0 when either side is missing
    /// or the two sides live in different-dimensional spaces.
    pub fn mention_similarity(
        &self,
        document_id: &str,
        span: (usize, usize),
        entity: &EntityId,
    ) -> f64 {
        match (self.anchor(document_id, span), self.entity_mention(entity)) {
            (Some(a), Some(b)) if a.len() == b.len() => cosine_similarity(a, b),
            _ => 0.0,
        }
    }

    pub fn anchor_len(&self) -> usize {
        self.anchors.len()
    }

    pub fn entity_len(&self) -> usize {
        self.entity_mentions.len()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hashed character-trigram bag of `text`, L2-normalized. Deterministic and
/// case-insensitive. Zero vector for texts shorter than one character.
pub fn trigram_embed(text: &str) -> Vec<f64> {
    let lowered: Vec<char> = text.chars().flat_map(char::to_lowercase).collect();
    let mut v = vec![0.0; TRIGRAM_DIM];
    if lowered.is_empty() {
        return v;
    }
    let n = lowered.len();
    for width in 1..=3usize.min(n) {
        if width < 3 && n >= 3 {
            // Only pad with shorter grams when the text itself is shorter
            // than a trigram.
            continue;
        }
        for window in lowered.windows(width) {
            let s: String = window.iter().collect();
            let idx = (fnv1a(s.as_bytes()) % TRIGRAM_DIM as u64) as usize;
            v[idx] += 1.0;
        }
    }
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// The mention ± `WINDOW_TOKENS` tokens of `text`, as a single string.
fn window_text(text: &str, span: (usize, usize)) -> String {
    let tokens = text::tokenize(text);
    let overlapping: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.end > span.0 && t.anchor_start < span.1)
        .map(|(i, _)| i)
        .collect();
    let (first, last) = match (overlapping.first(), overlapping.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return text[span.0..span.1].to_string(),
    };
    let lo = first.saturating_sub(WINDOW_TOKENS);
    let hi = (last + WINDOW_TOKENS).min(tokens.len().saturating_sub(1));
    let mut out = String::new();
    for tok in &tokens[lo..=hi] {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok.core(text));
    }
    out
}

/// Builds fallback context vectors for every annotation (document side) and
/// for every entity whose short abstract mentions its own label (candidate
/// side, first occurrence).
pub fn build_fallback_context(
    docs: &[Document],
    annotations: &[Annotation],
    kg: &KnowledgeGraph,
) -> ContextVectors {
    let texts: BTreeMap<&str, &str> = docs.iter().map(|d| (d.id.as_str(), d.text.as_str())).collect();
    let mut anchors = BTreeMap::new();
    for a in annotations {
        let Some(text) = texts.get(a.document_id.as_str()) else {
            continue;
        };
        anchors.insert(
            (a.document_id.clone(), a.span.0, a.span.1),
            trigram_embed(&window_text(text, a.span)),
        );
    }
    let mut entity_mentions = BTreeMap::new();
    for entity in kg.entities() {
        let Some(abs) = entity.short_abstract.as_deref() else {
            continue;
        };
        let Some(pos) = abs.find(&entity.label) else {
            continue;
        };
        let span = (pos, pos + entity.label.len());
        entity_mentions.insert(entity.id.clone(), trigram_embed(&window_text(abs, span)));
    }
    ContextVectors {
        anchors,
        entity_mentions,
    }
}

/// Loads anchor vectors from `doc_id<TAB>start<TAB>end<TAB>v1 … vd` lines.
/// All vectors must share one dimension.
pub fn load_anchor_vectors(path: &Path) -> Result<BTreeMap<(String, usize, usize), Vec<f64>>> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut out = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.splitn(4, '\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                &file,
                line_no,
                "expected `doc_id<TAB>start<TAB>end<TAB>components`",
            ));
        }
        let start: usize = fields[1]
            .parse()
            .map_err(|e| Error::parse(&file, line_no, format!("bad start: {e}")))?;
        let end: usize = fields[2]
            .parse()
            .map_err(|e| Error::parse(&file, line_no, format!("bad end: {e}")))?;
        let vector: Vec<f64> = fields[3]
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(&file, line_no, format!("bad component: {e}")))?;
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(&file, line_no, "non-finite component"));
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::parse(
                    &file,
                    line_no,
                    format!("vector dimension {} differs from {d}", vector.len()),
                ))
            }
            _ => {}
        }
        out.insert((fields[0].to_string(), start, end), vector);
    }
    Ok(out)
}

/// Assembles context vectors from external files. The candidate side reuses
/// the embedding-file format keyed by entity IRI.
pub fn load_context_vectors(
    anchor_path: &Path,
    entity_path: Option<&Path>,
) -> Result<ContextVectors> {
    let anchors = load_anchor_vectors(anchor_path)?;
    let entity_mentions = match entity_path {
        Some(p) => {
            let store = EmbeddingStore::load(p)?;
            let mut map = BTreeMap::new();
            for id in store.ids() {
                map.insert(id.clone(), store.get(id).expect("id from store").to_vec());
            }
            map
        }
        None => BTreeMap::new(),
    };
    Ok(ContextVectors {
        anchors,
        entity_mentions,
    })
}
