//! Syntactic and named-entity tags for anchors.
//!
//! Tags normally come from an external tagger's export file. When no file
//! is available a rule-based fallback produces weak stand-in tags so the
//! pipeline still runs; its confidences are fixed constants and its rules
//! are capitalization heuristics, nothing more.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::{Annotation, Document};
use crate::error::{Error, Result};
use crate::features::vocab;

#[derive(Debug, Clone, PartialEq)]
pub struct TagRecord {
    pub document_id: String,
    pub span: (usize, usize),
    pub pos_tag: u16,
    pub pos_confidence: f64,
    pub chunk_tag: u16,
    pub chunk_confidence: f64,
    pub ner_tag: u16,
    pub ner_confidence: f64,
}

/// Keyed by `(document id, span start, span end)`.
pub type TagMap = BTreeMap<(String, usize, usize), TagRecord>;

#[derive(Serialize, Deserialize)]
struct TagFileRecord {
    doc_id: String,
    start: usize,
    end: usize,
    pos: String,
    pos_conf: f64,
    chunk: String,
    chunk_conf: f64,
    ner: String,
    ner_conf: f64,
}

/// Reads a JSON-lines tag file (`doc_id, start, end, pos, pos_conf, chunk,
/// chunk_conf, ner, ner_conf`). Tags must belong to the declared
/// vocabularies and confidences to `[0, 1]`.
pub fn load_tags(path: &Path) -> Result<TagMap> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut map = TagMap::new();
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: TagFileRecord =
            serde_json::from_str(raw).map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
        for (name, conf) in [
            ("pos_conf", record.pos_conf),
            ("chunk_conf", record.chunk_conf),
            ("ner_conf", record.ner_conf),
        ] {
            if !(0.0..=1.0).contains(&conf) {
                return Err(Error::parse(
                    &file,
                    line_no,
                    format!("{name} {conf} outside [0, 1]"),
                ));
            }
        }
        let pos_tag = vocab::pos_index(&record.pos).ok_or_else(|| {
            Error::parse(&file, line_no, format!("unknown POS tag `{}`", record.pos))
        })?;
        let chunk_tag = vocab::chunk_index(&record.chunk).ok_or_else(|| {
            Error::parse(&file, line_no, format!("unknown chunk tag `{}`", record.chunk))
        })?;
        let ner_tag = vocab::ner_index(&record.ner).ok_or_else(|| {
            Error::parse(&file, line_no, format!("unknown NER tag `{}`", record.ner))
        })?;
        map.insert(
            (record.doc_id.clone(), record.start, record.end),
            TagRecord {
                document_id: record.doc_id,
                span: (record.start, record.end),
                pos_tag,
                pos_confidence: record.pos_conf,
                chunk_tag,
                chunk_confidence: record.chunk_conf,
                ner_tag,
                ner_confidence: record.ner_conf,
            },
        );
    }
    Ok(map)
}

pub fn write_tags(path: &Path, tags: &TagMap) -> Result<()> {
    let mut out = String::new();
    for tag in tags.values() {
        let record = TagFileRecord {
            doc_id: tag.document_id.clone(),
            start: tag.span.0,
            end: tag.span.1,
            pos: vocab::pos_name(tag.pos_tag).to_string(),
            pos_conf: tag.pos_confidence,
            chunk: vocab::chunk_name(tag.chunk_tag).to_string(),
            chunk_conf: tag.chunk_confidence,
            ner: vocab::ner_name(tag.ner_tag).to_string(),
            ner_conf: tag.ner_confidence,
        };
        out.push_str(&serde_json::to_string(&record).expect("tag record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Rule-based stand-in tagger: `NNP`/`NN` by capitalization at confidence
/// 0.5, chunk `NP` at 0.5, NER `LOC` at 0.6 for capitalized noun-like
/// anchors and `O` at 0.6 otherwise.
pub fn fallback_tag(_doc: &Document, annotation: &Annotation) -> TagRecord {
    let capitalized = annotation
        .anchor
        .chars()
        .find(|c| c.is_alphabetic())
        .map(|c| c.is_uppercase())
        .unwrap_or(false);
    let pos = if capitalized { "NNP" } else { "NN" };
    let noun_like = pos.starts_with("NN");
    let ner = if capitalized && noun_like { "LOC" } else { "O" };
    TagRecord {
        document_id: annotation.document_id.clone(),
        span: annotation.span,
        pos_tag: vocab::pos_index(pos).expect("fallback POS is in vocabulary"),
        pos_confidence: 0.5,
        chunk_tag: vocab::chunk_index("NP").expect("NP is in vocabulary"),
        chunk_confidence: 0.5,
        ner_tag: vocab::ner_index(ner).expect("fallback NER is in vocabulary"),
        ner_confidence: 0.6,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityId;

    fn annotation(anchor_text: &str) -> (Document, Annotation) {
        let text = format!("went to {anchor_text} yesterday");
        let doc = Document {
            id: "d1".into(),
            text: text.clone(),
            ground_truth: Vec::new(),
        };
        let start = 8;
        let ann = Annotation::new(
            "d1",
            &text,
            (start, start + anchor_text.len()),
            EntityId::new("urn:x").unwrap(),
            0.5,
        )
        .unwrap();
        (doc, ann)
    }

    #[test]
    fn capitalized_anchor_is_loc() {
        let (doc, ann) = annotation("Bath");
        let tag = fallback_tag(&doc, &ann);
        assert_eq!(vocab::ner_name(tag.ner_tag), "LOC");
        assert_eq!(vocab::pos_name(tag.pos_tag), "NNP");
        assert_eq!(tag.ner_confidence, 0.6);
        assert_eq!(tag.pos_confidence, 0.5);
    }

    #[test]
    fn lowercase_anchor_is_o() {
        let (doc, ann) = annotation("bath");
        let tag = fallback_tag(&doc, &ann);
        assert_eq!(vocab::ner_name(tag.ner_tag), "O");
        assert_eq!(vocab::pos_name(tag.pos_tag), "NN");
    }

    #[test]
    fn tag_file_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tags.jsonl");
        let (doc, ann) = annotation("Bath");
        let tag = fallback_tag(&doc, &ann);
        let mut map = TagMap::new();
        map.insert((tag.document_id.clone(), tag.span.0, tag.span.1), tag.clone());
        write_tags(&path, &map).unwrap();
        let loaded = load_tags(&path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded.values().next().unwrap(), &tag);

        std::fs::write(
            &path,
            r#"{"doc_id":"d","start":0,"end":1,"pos":"XYZ","pos_conf":0.5,"chunk":"NP","chunk_conf":0.5,"ner":"LOC","ner_conf":0.5}"#,
        )
        .unwrap();
        match load_tags(&path) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 1);
                assert!(message.contains("XYZ"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
