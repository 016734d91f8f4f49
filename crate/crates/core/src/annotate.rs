//! Semantic annotation: anchor spans linked to starting entities.
//!
//! Two routes produce annotations. The lexicon route builds a surface-form
//! index from the knowledge graph (optionally weighted by an alias file) and
//! matches token n-grams greedily, leftmost-longest. The ingestion route
//! reads annotations produced by an external annotator from a JSON-lines
//! file, validating spans against the documents when they are supplied.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, GeoCoordinate, KnowledgeGraph};
use crate::text;

/// A ground-truth location of a document: target coordinates plus, when the
/// dataset provides it, the entity the location refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLocation {
    pub coordinate: GeoCoordinate,
    pub entity: Option<EntityId>,
}

/// One input text with its ground truth. Most real-world short texts carry
/// no location at all, so `ground_truth` is frequently empty.
#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub ground_truth: Vec<GroundTruthLocation>,
}

/// An anchor span linked to a starting entity.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub document_id: String,
    /// Verbatim matched text, `text[span.0..span.1]`.
    pub anchor: String,
    /// Byte offsets into the document text.
    pub span: (usize, usize),
    pub start_entity: EntityId,
    /// Annotator confidence in `[0, 1]`.
    pub confidence: f64,
}

impl Annotation {
    pub fn new(
        document_id: impl Into<String>,
        doc_text: &str,
        span: (usize, usize),
        start_entity: EntityId,
        confidence: f64,
    ) -> Result<Self> {
        let document_id = document_id.into();
        if span.0 >= span.1 || span.1 > doc_text.len() || !doc_text.is_char_boundary(span.0)
            || !doc_text.is_char_boundary(span.1)
        {
            return Err(Error::invalid(format!(
                "annotation span {span:?} out of bounds for document `{document_id}`"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!(
                "confidence {confidence} outside [0, 1] in document `{document_id}`"
            )));
        }
        let anchor = doc_text[span.0..span.1].to_string();
        if text::normal_form(&anchor).is_empty() {
            return Err(Error::invalid(format!(
                "anchor `{anchor}` in document `{document_id}` has no tokens"
            )));
        }
        Ok(Annotation {
            document_id,
            anchor,
            span,
            start_entity,
            confidence,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub entity: EntityId,
    /// Prior probability that the surface form refers to this entity.
    pub commonness: f64,
}

/// Surface-form index: normalized form → candidate entities with commonness.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    surface_forms: BTreeMap<String, Vec<LexiconEntry>>,
    max_form_tokens: usize,
}

impl Lexicon {
    pub fn lookup(&self, form: &str) -> Option<&[LexiconEntry]> {
        self.surface_forms.get(form).map(Vec::as_slice)
    }

    pub fn contains_form(&self, form: &str) -> bool {
        self.surface_forms.contains_key(form)
    }

    pub fn max_form_tokens(&self) -> usize {
        self.max_form_tokens
    }

    pub fn len(&self) -> usize {
        self.surface_forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface_forms.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> + '_ {
        self.surface_forms.keys().map(String::as_str)
    }
}

/// Builds the surface-form lexicon from entity labels. Each label becomes a
/// normalized form; commonness is uniform across a form's entities unless
/// the alias file supplies counts, in which case commonness is
/// `count / form total`. Alias lines are `form<TAB>iri<TAB>count`.
pub fn build_lexicon(kg: &KnowledgeGraph, alias_file: Option<&Path>) -> Result<Lexicon> {
    // count 1 per label occurrence; alias counts override.
    let mut counts: BTreeMap<String, BTreeMap<EntityId, u64>> = BTreeMap::new();
    for entity in kg.entities() {
        let form = text::normal_form(&entity.label);
        if form.is_empty() {
            continue;
        }
        counts
            .entry(form)
            .or_default()
            .entry(entity.id.clone())
            .or_insert(1);
    }
    if let Some(path) = alias_file {
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file = path.display().to_string();
        for (idx, raw) in src.lines().enumerate() {
            let line_no = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let mut fields = raw.split('\t');
            let (form, iri, count) = match (fields.next(), fields.next(), fields.next()) {
                (Some(f), Some(i), Some(c)) => (f, i, c),
                _ => {
                    return Err(Error::parse(
                        &file,
                        line_no,
                        "expected `form<TAB>iri<TAB>count`",
                    ))
                }
            };
            let count: u64 = count.parse().map_err(|_| {
                Error::parse(&file, line_no, format!("count `{count}` is not an integer"))
            })?;
            if count == 0 {
                return Err(Error::parse(&file, line_no, "count must be positive"));
            }
            let id = EntityId::new(iri).map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
            if !kg.contains(&id) {
                return Err(Error::parse(
                    &file,
                    line_no,
                    format!("alias references unknown entity `{iri}`"),
                ));
            }
            let form = text::normal_form(form);
            if form.is_empty() {
                return Err(Error::parse(&file, line_no, "alias form has no tokens"));
            }
            counts.entry(form).or_default().insert(id, count);
        }
    }
    let mut surface_forms = BTreeMap::new();
    let mut max_form_tokens = 1;
    for (form, per_entity) in counts {
        let total: u64 = per_entity.values().sum();
        let entries: Vec<LexiconEntry> = per_entity
            .into_iter()
            .map(|(entity, count)| LexiconEntry {
                entity,
                commonness: count as f64 / total as f64,
            })
            .collect();
        max_form_tokens = max_form_tokens.max(text::token_count(&form));
        surface_forms.insert(form, entries);
    }
    Ok(Lexicon {
        surface_forms,
        max_form_tokens,
    })
}

/// Greedy leftmost-longest matching of lexicon forms over the document's
/// token n-grams. Matching is case-insensitive; the anchor keeps its
/// original case (and a leading `#`). For each match the starting entity is
/// the commonness argmax (ties broken by `EntityId` order) and the
/// annotation confidence is that commonness. Output annotations never
/// overlap and are sorted by span start.
pub fn annotate(doc: &Document, lexicon: &Lexicon) -> Vec<Annotation> {
    let tokens = text::tokenize(&doc.text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let max_n = lexicon.max_form_tokens().min(tokens.len() - i);
        let mut matched = false;
        for n in (1..=max_n).rev() {
            let span = (tokens[i].anchor_start, tokens[i + n - 1].end);
            let form = ngram_form(&doc.text, &tokens[i..i + n]);
            let Some(entries) = lexicon.lookup(&form) else {
                continue;
            };
            let best = entries
                .iter()
                .max_by(|a, b| {
                    a.commonness
                        .total_cmp(&b.commonness)
                        .then_with(|| b.entity.cmp(&a.entity))
                })
                .expect("lexicon forms are non-empty");
            let annotation = Annotation::new(
                doc.id.clone(),
                &doc.text,
                span,
                best.entity.clone(),
                best.commonness,
            )
            .expect("token spans are valid");
            out.push(annotation);
            i += n;
            matched = true;
            break;
        }
        if !matched {
            i += 1;
        }
    }
    out
}

fn ngram_form(text: &str, tokens: &[text::Token]) -> String {
    let mut form = String::new();
    for tok in tokens {
        if !form.is_empty() {
            form.push(' ');
        }
        form.extend(tok.core(text).chars().flat_map(char::to_lowercase));
    }
    form
}

#[derive(Serialize, Deserialize)]
struct AnnotationRecord {
    doc_id: String,
    anchor: String,
    start: usize,
    end: usize,
    entity_iri: String,
    confidence: f64,
}

/// Reads externally produced annotations (one JSON object per line with
/// fields `doc_id, anchor, start, end, entity_iri, confidence`). When
/// `documents` is supplied, spans are validated against the document texts
/// and the anchor must equal `text[start..end]`.
pub fn load_annotations(
    path: &Path,
    documents: Option<&BTreeMap<String, Document>>,
) -> Result<Vec<Annotation>> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut out = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord = serde_json::from_str(raw)
            .map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
        if !(0.0..=1.0).contains(&record.confidence) {
            return Err(Error::parse(
                &file,
                line_no,
                format!("confidence {} outside [0, 1]", record.confidence),
            ));
        }
        let entity = EntityId::new(record.entity_iri)
            .map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
        if let Some(docs) = documents {
            let doc = docs.get(&record.doc_id).ok_or_else(|| {
                Error::parse(&file, line_no, format!("unknown document `{}`", record.doc_id))
            })?;
            let annotation = Annotation::new(
                record.doc_id.clone(),
                &doc.text,
                (record.start, record.end),
                entity,
                record.confidence,
            )
            .map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
            if annotation.anchor != record.anchor {
                return Err(Error::parse(
                    &file,
                    line_no,
                    format!(
                        "span mismatch in document `{}`: text has `{}`, record says `{}`",
                        record.doc_id, annotation.anchor, record.anchor
                    ),
                ));
            }
            out.push(annotation);
        } else {
            if record.start >= record.end {
                return Err(Error::parse(&file, line_no, "empty span"));
            }
            if text::normal_form(&record.anchor).is_empty() {
                return Err(Error::parse(&file, line_no, "anchor has no tokens"));
            }
            out.push(Annotation {
                document_id: record.doc_id,
                anchor: record.anchor,
                span: (record.start, record.end),
                start_entity: entity,
                confidence: record.confidence,
            });
        }
    }
    Ok(out)
}

/// Writes annotations in the format accepted by [`load_annotations`].
pub fn write_annotations(path: &Path, annotations: &[Annotation]) -> Result<()> {
    let mut out = String::new();
    for a in annotations {
        let record = AnnotationRecord {
            doc_id: a.document_id.clone(),
            anchor: a.anchor.clone(),
            start: a.span.0,
            end: a.span.1,
            entity_iri: a.start_entity.as_str().to_string(),
            confidence: a.confidence,
        };
        out.push_str(&serde_json::to_string(&record).expect("annotation serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{GeoPredicateConfig, KnowledgeGraphBuilder};

    fn doc(text: &str) -> Document {
        Document {
            id: "d1".into(),
            text: text.into(),
            ground_truth: Vec::new(),
        }
    }

    fn two_bath_graph() -> KnowledgeGraph {
        let mut b = KnowledgeGraphBuilder::new();
        b.add_entity("urn:e1", "Bath").unwrap();
        b.add_entity("urn:e2", "bath").unwrap();
        b.add_entity("urn:ny", "New York").unwrap();
        b.add_entity("urn:nyc", "New York City").unwrap();
        b.build(&GeoPredicateConfig::default()).0
    }

    #[test]
    fn labels_sharing_a_form_split_commonness_uniformly() {
        let kg = two_bath_graph();
        let lex = build_lexicon(&kg, None).unwrap();
        let entries = lex.lookup("bath").unwrap();
        assert_eq!(entries.len(), 2);
        for e in entries {
            assert!((e.commonness - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn alias_counts_override_uniform_split() {
        let kg = two_bath_graph();
        let dir = tempfile::tempdir().unwrap();
        let alias = dir.path().join("aliases.tsv");
        std::fs::write(&alias, "bath\turn:e1\t9\nbath\turn:e2\t1\n").unwrap();
        let lex = build_lexicon(&kg, Some(&alias)).unwrap();
        let entries = lex.lookup("bath").unwrap();
        let m: BTreeMap<&str, f64> = entries
            .iter()
            .map(|e| (e.entity.as_str(), e.commonness))
            .collect();
        assert!((m["urn:e1"] - 0.9).abs() < 1e-12);
        assert!((m["urn:e2"] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn empty_graph_gives_empty_lexicon() {
        let kg = KnowledgeGraphBuilder::new()
            .build(&GeoPredicateConfig::default())
            .0;
        let lex = build_lexicon(&kg, None).unwrap();
        assert!(lex.is_empty());
    }

    #[test]
    fn annotate_picks_commonness_argmax() {
        let kg = two_bath_graph();
        let dir = tempfile::tempdir().unwrap();
        let alias = dir.path().join("aliases.tsv");
        std::fs::write(&alias, "bath\turn:e1\t9\nbath\turn:e2\t1\n").unwrap();
        let lex = build_lexicon(&kg, Some(&alias)).unwrap();
        let anns = annotate(&doc("visiting Bath today"), &lex);
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].anchor, "Bath");
        assert_eq!(anns[0].start_entity.as_str(), "urn:e1");
        assert!((anns[0].confidence - 0.9).abs() < 1e-12);
    }

    #[test]
    fn no_lexicon_forms_means_no_annotations() {
        let kg = two_bath_graph();
        let lex = build_lexicon(&kg, None).unwrap();
        assert!(annotate(&doc("nothing to see here"), &lex).is_empty());
    }

    #[test]
    fn leftmost_longest_prefers_three_token_form() {
        let kg = two_bath_graph();
        let lex = build_lexicon(&kg, None).unwrap();
        let anns = annotate(&doc("I love New York City in spring"), &lex);
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].anchor, "New York City");
        assert_eq!(anns[0].start_entity.as_str(), "urn:nyc");
    }

    #[test]
    fn hashtag_anchor_keeps_hash() {
        let kg = two_bath_graph();
        let lex = build_lexicon(&kg, None).unwrap();
        let d = doc("weekend in #Bath");
        let anns = annotate(&d, &lex);
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].anchor, "#Bath");
        assert_eq!(&d.text[anns[0].span.0..anns[0].span.1], "#Bath");
    }

    #[test]
    fn annotations_are_sorted_and_disjoint() {
        let kg = two_bath_graph();
        let lex = build_lexicon(&kg, None).unwrap();
        let anns = annotate(&doc("Bath then New York then Bath again"), &lex);
        assert_eq!(anns.len(), 3);
        for pair in anns.windows(2) {
            assert!(pair[0].span.1 <= pair[1].span.0);
        }
    }

    #[test]
    fn annotate_is_deterministic_and_anchors_are_lexicon_keys() {
        let kg = two_bath_graph();
        let lex = build_lexicon(&kg, None).unwrap();
        let d = doc("#Bath then New York City, then bath again!");
        let first = annotate(&d, &lex);
        let second = annotate(&d, &lex);
        assert_eq!(first, second);
        for a in &first {
            let form = crate::text::normal_form(&a.anchor);
            assert!(lex.contains_form(&form), "anchor `{}` not a key", a.anchor);
        }
    }

    #[test]
    fn load_annotations_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_annotations(&path, None).unwrap().is_empty());

        let record = r#"{"doc_id":"d1","anchor":"Bath","start":9,"end":13,"entity_iri":"urn:e1","confidence":0.9}"#;
        std::fs::write(&path, format!("{record}\n")).unwrap();
        let mut docs = BTreeMap::new();
        docs.insert("d1".to_string(), doc("visiting Bath today"));
        let anns = load_annotations(&path, Some(&docs)).unwrap();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].anchor, "Bath");
        assert_eq!(anns[0].span, (9, 13));

        let bad = r#"{"doc_id":"d1","anchor":"Bath","start":9,"end":13,"entity_iri":"urn:e1","confidence":1.2}"#;
        std::fs::write(&path, format!("{bad}\n")).unwrap();
        assert!(load_annotations(&path, Some(&docs)).is_err());

        let mismatch = r#"{"doc_id":"d1","anchor":"Wrong","start":9,"end":13,"entity_iri":"urn:e1","confidence":0.5}"#;
        std::fs::write(&path, format!("{mismatch}\n")).unwrap();
        let err = load_annotations(&path, Some(&docs)).unwrap_err();
        assert!(err.to_string().contains("d1"));
    }
}
