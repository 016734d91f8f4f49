//! Declared vocabularies for the categorical features.
//!
//! Categorical features are carried as vocabulary indices; index 0 is the
//! none/unknown value of each vocabulary. One-hot expansion always uses the
//! declared cardinality, not the number of known values.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Declared cardinality of the `superclass` feature.
pub const SUPERCLASS_CARD: usize = 5;
/// Declared cardinality of the `pos_tag` feature.
pub const POS_CARD: usize = 50;
/// Declared cardinality of the `chunk_tag` feature.
pub const CHUNK_CARD: usize = 10;
/// Declared cardinality of the `ner_tag` feature.
pub const NER_CARD: usize = 5;

/// Penn-Treebank-style POS tags, `UNK` first.
pub const POS_TAGS: &[&str] = &[
    "UNK", "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS",
    "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH",
    "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB", "#", "$", ".", ",",
    ":", "(", ")", "``", "''", "HT", "USR", "URL", "RT",
];

pub const CHUNK_TAGS: &[&str] = &[
    "O", "NP", "VP", "PP", "ADVP", "ADJP", "SBAR", "PRT", "CONJP", "INTJ",
];

pub const NER_TAGS: &[&str] = &["O", "LOC", "PER", "ORG", "MISC"];

fn index_of(vocab: &[&str], tag: &str) -> Option<u16> {
    vocab.iter().position(|t| *t == tag).map(|i| i as u16)
}

pub fn pos_index(tag: &str) -> Option<u16> {
    index_of(POS_TAGS, tag)
}

pub fn chunk_index(tag: &str) -> Option<u16> {
    index_of(CHUNK_TAGS, tag)
}

pub fn ner_index(tag: &str) -> Option<u16> {
    index_of(NER_TAGS, tag)
}

pub fn pos_name(idx: u16) -> &'static str {
    POS_TAGS.get(idx as usize).copied().unwrap_or("UNK")
}

pub fn chunk_name(idx: u16) -> &'static str {
    CHUNK_TAGS.get(idx as usize).copied().unwrap_or("O")
}

pub fn ner_name(idx: u16) -> &'static str {
    NER_TAGS.get(idx as usize).copied().unwrap_or("O")
}

/// Top-level resource-type buckets derived from ontology classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SuperclassBucket {
    Other = 0,
    Place = 1,
    Agent = 2,
    Event = 3,
    ActivityWork = 4,
}

impl SuperclassBucket {
    pub fn as_str(&self) -> &'static str {
        match self {
            SuperclassBucket::Other => "other",
            SuperclassBucket::Place => "place",
            SuperclassBucket::Agent => "agent",
            SuperclassBucket::Event => "event",
            SuperclassBucket::ActivityWork => "activity-work",
        }
    }

    pub fn parse(s: &str) -> Option<SuperclassBucket> {
        match s {
            "other" => Some(SuperclassBucket::Other),
            "place" => Some(SuperclassBucket::Place),
            "agent" => Some(SuperclassBucket::Agent),
            "event" => Some(SuperclassBucket::Event),
            "activity-work" => Some(SuperclassBucket::ActivityWork),
            _ => None,
        }
    }
}

/// Class-IRI → bucket assignment; classes not in the map fall into `Other`.
#[derive(Debug, Clone)]
pub struct SuperclassMap {
    classes: BTreeMap<String, SuperclassBucket>,
}

pub const DEFAULT_SUPERCLASS_MAP: &str = include_str!("default_superclass_map.txt");

impl SuperclassMap {
    pub fn parse(src: &str, file: &str) -> Result<Self> {
        let mut classes = BTreeMap::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (iri, bucket) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(file, idx + 1, "expected `class-iri<TAB>bucket`"))?;
            let bucket = SuperclassBucket::parse(bucket.trim()).ok_or_else(|| {
                Error::parse(file, idx + 1, format!("unknown bucket `{bucket}`"))
            })?;
            classes.insert(iri.trim().to_string(), bucket);
        }
        Ok(SuperclassMap { classes })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src, &path.display().to_string())
    }

    pub fn bucket_of(&self, class_iri: &str) -> SuperclassBucket {
        self.classes
            .get(class_iri)
            .copied()
            .unwrap_or(SuperclassBucket::Other)
    }

    /// The single bucket reported as the `superclass` feature: the first of
    /// Place, Agent, Event, ActivityWork matched by any class, else Other.
    pub fn superclass<'a>(
        &self,
        classes: impl Iterator<Item = &'a String>,
    ) -> SuperclassBucket {
        let mut matched = [false; SUPERCLASS_CARD];
        for class in classes {
            matched[self.bucket_of(class) as usize] = true;
        }
        for bucket in [
            SuperclassBucket::Place,
            SuperclassBucket::Agent,
            SuperclassBucket::Event,
            SuperclassBucket::ActivityWork,
        ] {
            if matched[bucket as usize] {
                return bucket;
            }
        }
        SuperclassBucket::Other
    }

    /// Number of distinct non-`Other` buckets covered by the classes.
    pub fn distinct_buckets<'a>(&self, classes: impl Iterator<Item = &'a String>) -> usize {
        let mut matched = [false; SUPERCLASS_CARD];
        for class in classes {
            matched[self.bucket_of(class) as usize] = true;
        }
        matched[1..].iter().filter(|b| **b).count()
    }
}

impl Default for SuperclassMap {
    fn default() -> Self {
        Self::parse(DEFAULT_SUPERCLASS_MAP, "<default superclass map>")
            .expect("built-in superclass map parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinalities_hold() {
        assert!(POS_TAGS.len() <= POS_CARD);
        assert_eq!(CHUNK_TAGS.len(), CHUNK_CARD);
        assert_eq!(NER_TAGS.len(), NER_CARD);
    }

    #[test]
    fn place_wins_bucket_priority() {
        let map = SuperclassMap::default();
        let classes = ["http://dbpedia.org/ontology/Agent".to_string(),
            "http://dbpedia.org/ontology/Place".to_string()];
        assert_eq!(map.superclass(classes.iter()), SuperclassBucket::Place);
        assert_eq!(map.distinct_buckets(classes.iter()), 2);
    }

    #[test]
    fn unknown_classes_fall_into_other() {
        let map = SuperclassMap::default();
        let classes = ["http://example.org/Nothing".to_string()];
        assert_eq!(map.superclass(classes.iter()), SuperclassBucket::Other);
        assert_eq!(map.distinct_buckets(classes.iter()), 0);
    }
}
