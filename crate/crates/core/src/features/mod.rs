//! The regression features for one (annotation, candidate) pair.
//!
//! Thirty-one features in six groups: annotation & expansion metadata,
//! spelling comparisons between anchor and labels, knowledge-graph content
//! of the candidate, syntactic tags, named-entity tags, and latent vector
//! similarities. Categorical features are carried as vocabulary indices and
//! one-hot expanded for training; every numeric entry is finite for any
//! input — missing inputs produce documented sentinel values, never errors.

pub mod context;
pub mod tags;
pub mod vocab;

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::annotate::Annotation;
use crate::embed::{cosine_similarity, EmbeddingStore};
use crate::error::{Error, Result};
use crate::expand::Candidate;
use crate::kg::KnowledgeGraph;
use crate::text;

pub use context::ContextVectors;
pub use tags::{fallback_tag, load_tags, TagMap, TagRecord};
pub use vocab::{SuperclassBucket, SuperclassMap};

/// Feature value of `hop` when the candidate is farther from the start than
/// the hop cutoff (or disconnected). Distinct from every real hop count.
pub const UNREACHABLE_HOP: f64 = -1.0;

/// Case-sensitive Levenshtein distance over Unicode scalar values, with
/// unit insert/delete/substitute costs.
pub fn edit_distance(a: &str, b: &str) -> u32 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len() as u32;
    }
    if b.is_empty() {
        return a.len() as u32;
    }
    let mut prev: Vec<u32> = (0..=b.len() as u32).collect();
    let mut curr = vec![0u32; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i as u32 + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + u32::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Non-overlapping occurrences of `needle` in `haystack`.
fn count_occurrences(haystack: &str, needle: &str) -> usize {
    if needle.is_empty() {
        return 0;
    }
    haystack.matches(needle).count()
}

fn count_occurrences_ci(haystack: &str, needle: &str) -> usize {
    count_occurrences(&haystack.to_lowercase(), &needle.to_lowercase())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    AnnotationExpansion,
    Spelling,
    Dbpedia,
    Syntactic,
    NamedEntity,
    Latent,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::AnnotationExpansion,
        FeatureGroup::Spelling,
        FeatureGroup::Dbpedia,
        FeatureGroup::Syntactic,
        FeatureGroup::NamedEntity,
        FeatureGroup::Latent,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureGroup::AnnotationExpansion => "A&E",
            FeatureGroup::Spelling => "SPE",
            FeatureGroup::Dbpedia => "DBP",
            FeatureGroup::Syntactic => "SYN",
            FeatureGroup::NamedEntity => "NER",
            FeatureGroup::Latent => "LAT",
        }
    }

    /// Number of logical features in the group.
    pub fn cardinality(&self) -> usize {
        match self {
            FeatureGroup::AnnotationExpansion => 4,
            FeatureGroup::Spelling => 10,
            FeatureGroup::Dbpedia => 9,
            FeatureGroup::Syntactic => 4,
            FeatureGroup::NamedEntity => 2,
            FeatureGroup::Latent => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FeatureKind {
    Numeric,
    Categorical(usize),
}

struct FeatureDef {
    name: &'static str,
    group: FeatureGroup,
    kind: FeatureKind,
}

const FEATURE_COUNT: usize = 31;

const FEATURES: [FeatureDef; FEATURE_COUNT] = [
    FeatureDef { name: "confidence", group: FeatureGroup::AnnotationExpansion, kind: FeatureKind::Numeric },
    FeatureDef { name: "hop", group: FeatureGroup::AnnotationExpansion, kind: FeatureKind::Numeric },
    FeatureDef { name: "expansion_rank", group: FeatureGroup::AnnotationExpansion, kind: FeatureKind::Numeric },
    FeatureDef { name: "expansion_rank_onlygeo", group: FeatureGroup::AnnotationExpansion, kind: FeatureKind::Numeric },
    FeatureDef { name: "num_tokens_candidate_label", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "len_candidate_label", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "edit_from_original_label", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "num_tokens_anchor", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "len_anchor", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "uppercase_in_anchor", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "edit_from_anchor", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "edit_ratio_from_anchor", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "num_tokens_ratio", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "len_ratio", group: FeatureGroup::Spelling, kind: FeatureKind::Numeric },
    FeatureDef { name: "superclass", group: FeatureGroup::Dbpedia, kind: FeatureKind::Categorical(vocab::SUPERCLASS_CARD) },
    FeatureDef { name: "num_of_superclasses", group: FeatureGroup::Dbpedia, kind: FeatureKind::Numeric },
    FeatureDef { name: "num_of_classes", group: FeatureGroup::Dbpedia, kind: FeatureKind::Numeric },
    FeatureDef { name: "page_degree", group: FeatureGroup::Dbpedia, kind: FeatureKind::Numeric },
    FeatureDef { name: "page_length", group: FeatureGroup::Dbpedia, kind: FeatureKind::Numeric },
    FeatureDef { name: "anchor_in_short_abstract", group: FeatureGroup::Dbpedia, kind: FeatureKind::Numeric },
    FeatureDef { name: "anchor_in_short_abstract_ci", group: FeatureGroup::Dbpedia, kind: FeatureKind::Numeric },
    FeatureDef { name: "anchor_in_long_abstract", group: FeatureGroup::Dbpedia, kind: FeatureKind::Numeric },
    FeatureDef { name: "anchor_in_long_abstract_ci", group: FeatureGroup::Dbpedia, kind: FeatureKind::Numeric },
    FeatureDef { name: "pos_tag", group: FeatureGroup::Syntactic, kind: FeatureKind::Categorical(vocab::POS_CARD) },
    FeatureDef { name: "chunk_tag", group: FeatureGroup::Syntactic, kind: FeatureKind::Categorical(vocab::CHUNK_CARD) },
    FeatureDef { name: "pos_confidence", group: FeatureGroup::Syntactic, kind: FeatureKind::Numeric },
    FeatureDef { name: "chunk_confidence", group: FeatureGroup::Syntactic, kind: FeatureKind::Numeric },
    FeatureDef { name: "ner_tag", group: FeatureGroup::NamedEntity, kind: FeatureKind::Categorical(vocab::NER_CARD) },
    FeatureDef { name: "ner_confidence", group: FeatureGroup::NamedEntity, kind: FeatureKind::Numeric },
    FeatureDef { name: "rdf2vec_similarity", group: FeatureGroup::Latent, kind: FeatureKind::Numeric },
    FeatureDef { name: "bert_similarity", group: FeatureGroup::Latent, kind: FeatureKind::Numeric },
];

/// Mapping between the 31 logical features and the one-hot-expanded dense
/// matrix used by the tree learners.
pub struct FeatureSchema {
    /// Per logical feature: (dense start column, width).
    spans: Vec<(usize, usize)>,
    /// Per dense column: owning logical feature index.
    column_owner: Vec<usize>,
}

impl FeatureSchema {
    pub fn get() -> &'static FeatureSchema {
        static SCHEMA: OnceLock<FeatureSchema> = OnceLock::new();
        SCHEMA.get_or_init(|| {
            let mut spans = Vec::with_capacity(FEATURE_COUNT);
            let mut column_owner = Vec::new();
            for (i, def) in FEATURES.iter().enumerate() {
                let width = match def.kind {
                    FeatureKind::Numeric => 1,
                    FeatureKind::Categorical(card) => card,
                };
                spans.push((column_owner.len(), width));
                column_owner.extend(std::iter::repeat_n(i, width));
            }
            FeatureSchema { spans, column_owner }
        })
    }

    pub fn dense_width(&self) -> usize {
        self.column_owner.len()
    }

    pub fn feature_count(&self) -> usize {
        FEATURE_COUNT
    }

    pub fn name(&self, logical: usize) -> &'static str {
        FEATURES[logical].name
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> {
        FEATURES.iter().map(|d| d.name)
    }

    pub fn group(&self, logical: usize) -> FeatureGroup {
        FEATURES[logical].group
    }

    pub fn logical_of_column(&self, column: usize) -> usize {
        self.column_owner[column]
    }

    pub fn span(&self, logical: usize) -> (usize, usize) {
        self.spans[logical]
    }
}

/// The 31 regressors for one (annotation, candidate) pair. Categorical
/// entries hold vocabulary indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub confidence: f64,
    pub hop: f64,
    pub expansion_rank: f64,
    pub expansion_rank_onlygeo: f64,
    pub num_tokens_candidate_label: f64,
    pub len_candidate_label: f64,
    pub edit_from_original_label: f64,
    pub num_tokens_anchor: f64,
    pub len_anchor: f64,
    pub uppercase_in_anchor: f64,
    pub edit_from_anchor: f64,
    pub edit_ratio_from_anchor: f64,
    pub num_tokens_ratio: f64,
    pub len_ratio: f64,
    pub superclass: u16,
    pub num_of_superclasses: f64,
    pub num_of_classes: f64,
    pub page_degree: f64,
    pub page_length: f64,
    pub anchor_in_short_abstract: f64,
    pub anchor_in_short_abstract_ci: f64,
    pub anchor_in_long_abstract: f64,
    pub anchor_in_long_abstract_ci: f64,
    pub pos_tag: u16,
    pub chunk_tag: u16,
    pub pos_confidence: f64,
    pub chunk_confidence: f64,
    pub ner_tag: u16,
    pub ner_confidence: f64,
    pub rdf2vec_similarity: f64,
    pub bert_similarity: f64,
}

impl FeatureVector {
    /// Logical values in feature order; categorical entries as their index.
    pub fn logical_values(&self) -> [f64; FEATURE_COUNT] {
        [
            self.confidence,
            self.hop,
            self.expansion_rank,
            self.expansion_rank_onlygeo,
            self.num_tokens_candidate_label,
            self.len_candidate_label,
            self.edit_from_original_label,
            self.num_tokens_anchor,
            self.len_anchor,
            self.uppercase_in_anchor,
            self.edit_from_anchor,
            self.edit_ratio_from_anchor,
            self.num_tokens_ratio,
            self.len_ratio,
            f64::from(self.superclass),
            self.num_of_superclasses,
            self.num_of_classes,
            self.page_degree,
            self.page_length,
            self.anchor_in_short_abstract,
            self.anchor_in_short_abstract_ci,
            self.anchor_in_long_abstract,
            self.anchor_in_long_abstract_ci,
            f64::from(self.pos_tag),
            f64::from(self.chunk_tag),
            self.pos_confidence,
            self.chunk_confidence,
            f64::from(self.ner_tag),
            self.ner_confidence,
            self.rdf2vec_similarity,
            self.bert_similarity,
        ]
    }

    /// Inverse of [`FeatureVector::logical_values`]; categorical entries
    /// are truncated to their vocabulary index.
    pub fn from_logical(v: &[f64; FEATURE_COUNT]) -> FeatureVector {
        FeatureVector {
            confidence: v[0],
            hop: v[1],
            expansion_rank: v[2],
            expansion_rank_onlygeo: v[3],
            num_tokens_candidate_label: v[4],
            len_candidate_label: v[5],
            edit_from_original_label: v[6],
            num_tokens_anchor: v[7],
            len_anchor: v[8],
            uppercase_in_anchor: v[9],
            edit_from_anchor: v[10],
            edit_ratio_from_anchor: v[11],
            num_tokens_ratio: v[12],
            len_ratio: v[13],
            superclass: v[14] as u16,
            num_of_superclasses: v[15],
            num_of_classes: v[16],
            page_degree: v[17],
            page_length: v[18],
            anchor_in_short_abstract: v[19],
            anchor_in_short_abstract_ci: v[20],
            anchor_in_long_abstract: v[21],
            anchor_in_long_abstract_ci: v[22],
            pos_tag: v[23] as u16,
            chunk_tag: v[24] as u16,
            pos_confidence: v[25],
            chunk_confidence: v[26],
            ner_tag: v[27] as u16,
            ner_confidence: v[28],
            rdf2vec_similarity: v[29],
            bert_similarity: v[30],
        }
    }

    /// One-hot-expanded dense row for the tree learners.
    pub fn to_dense(&self) -> Vec<f64> {
        let schema = FeatureSchema::get();
        let mut row = vec![0.0; schema.dense_width()];
        let logical = self.logical_values();
        for (i, def) in FEATURES.iter().enumerate() {
            let (start, width) = schema.span(i);
            match def.kind {
                FeatureKind::Numeric => row[start] = logical[i],
                FeatureKind::Categorical(card) => {
                    debug_assert_eq!(width, card);
                    let idx = (logical[i] as usize).min(card - 1);
                    row[start + idx] = 1.0;
                }
            }
        }
        row
    }

    pub fn is_finite(&self) -> bool {
        self.logical_values().iter().all(|v| v.is_finite())
    }
}

/// Read-only stores consumed by feature computation.
pub struct FeatureInputs<'a> {
    pub kg: &'a KnowledgeGraph,
    pub embeddings: Option<&'a EmbeddingStore>,
    pub context: Option<&'a ContextVectors>,
    pub superclass_map: &'a SuperclassMap,
}

/// Computes all 31 features. Total: missing stores, vectors, tags or
/// abstracts yield sentinels (0 counts, 0.0 similarities, `UNK`/`O` tags,
/// [`UNREACHABLE_HOP`]); the candidate entity must exist in the graph.
pub fn compute_features(
    annotation: &Annotation,
    candidate: &Candidate,
    tag: Option<&TagRecord>,
    inputs: &FeatureInputs<'_>,
) -> FeatureVector {
    let entity = inputs
        .kg
        .entity(&candidate.entity)
        .expect("candidate entity exists in the knowledge graph");
    let anchor = annotation.anchor.as_str();
    let candidate_label = entity.label.as_str();
    let start_label = inputs
        .kg
        .label(&annotation.start_entity)
        .unwrap_or_default();

    let len_anchor = anchor.chars().count() as f64;
    let num_tokens_anchor = text::token_count(anchor) as f64;
    debug_assert!(len_anchor > 0.0 && num_tokens_anchor > 0.0, "anchors have tokens");
    // Valid annotations always have a tokenized anchor; the clamps keep the
    // ratios finite even for hand-built annotations that violate that.
    let anchor_chars = len_anchor.max(1.0);
    let anchor_tokens = num_tokens_anchor.max(1.0);
    let len_candidate_label = candidate_label.chars().count() as f64;
    let edit_from_anchor = f64::from(edit_distance(candidate_label, anchor));

    let short_abstract = entity.short_abstract.as_deref().unwrap_or("");
    let long_abstract = entity.long_abstract.as_deref().unwrap_or("");

    let rdf2vec_similarity = inputs
        .embeddings
        .and_then(|store| {
            let a = store.get(&annotation.start_entity)?;
            let b = store.get(&candidate.entity)?;
            Some(cosine_similarity(a, b))
        })
        .unwrap_or(0.0);
    let bert_similarity = inputs
        .context
        .map(|ctx| ctx.mention_similarity(&annotation.document_id, annotation.span, &candidate.entity))
        .unwrap_or(0.0);

    FeatureVector {
        confidence: annotation.confidence,
        hop: candidate.hop.map(f64::from).unwrap_or(UNREACHABLE_HOP),
        expansion_rank: candidate.expansion_rank as f64,
        expansion_rank_onlygeo: candidate.expansion_rank_onlygeo as f64,
        num_tokens_candidate_label: text::token_count(candidate_label) as f64,
        len_candidate_label,
        edit_from_original_label: f64::from(edit_distance(start_label, candidate_label)),
        num_tokens_anchor,
        len_anchor,
        uppercase_in_anchor: anchor.chars().filter(|c| c.is_uppercase()).count() as f64,
        edit_from_anchor,
        edit_ratio_from_anchor: edit_from_anchor / anchor_chars,
        num_tokens_ratio: text::token_count(candidate_label) as f64 / anchor_tokens,
        len_ratio: len_candidate_label / anchor_chars,
        superclass: inputs.superclass_map.superclass(entity.classes.iter()) as u16,
        num_of_superclasses: inputs.superclass_map.distinct_buckets(entity.classes.iter()) as f64,
        num_of_classes: entity.classes.len() as f64,
        page_degree: f64::from(inputs.kg.degree(&candidate.entity)),
        page_length: entity.page_length.unwrap_or(0) as f64,
        anchor_in_short_abstract: count_occurrences(short_abstract, anchor) as f64,
        anchor_in_short_abstract_ci: count_occurrences_ci(short_abstract, anchor) as f64,
        anchor_in_long_abstract: count_occurrences(long_abstract, anchor) as f64,
        anchor_in_long_abstract_ci: count_occurrences_ci(long_abstract, anchor) as f64,
        pos_tag: tag.map(|t| t.pos_tag).unwrap_or(0),
        chunk_tag: tag.map(|t| t.chunk_tag).unwrap_or(0),
        pos_confidence: tag.map(|t| t.pos_confidence).unwrap_or(0.0),
        chunk_confidence: tag.map(|t| t.chunk_confidence).unwrap_or(0.0),
        ner_tag: tag.map(|t| t.ner_tag).unwrap_or(0),
        ner_confidence: tag.map(|t| t.ner_confidence).unwrap_or(0.0),
        rdf2vec_similarity,
        bert_similarity,
    }
}

/// Writes a feature matrix as CSV: the 31 feature columns plus a `label`
/// column. Categorical features are written as their vocabulary index.
pub fn export_feature_matrix(path: &Path, rows: &[(FeatureVector, f64)]) -> Result<()> {
    let schema = FeatureSchema::get();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::invalid(e.to_string()))?;
    let mut header: Vec<&str> = schema.names().collect();
    header.push("label");
    writer
        .write_record(&header)
        .map_err(|e| Error::invalid(e.to_string()))?;
    for (fv, label) in rows {
        let mut record: Vec<String> = fv.logical_values().iter().map(|v| v.to_string()).collect();
        record.push(label.to_string());
        writer
            .write_record(&record)
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::Document;
    use crate::kg::{EntityId, GeoPredicateConfig, KnowledgeGraphBuilder};
    use proptest::prelude::*;

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance("bath", "bath"), 0);
        assert_eq!(edit_distance("bath", "Bath"), 1);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("Bath", "Bath, Somerset"), 10);
    }

    fn fixture() -> (KnowledgeGraph, Document, Annotation, Candidate) {
        let mut b = KnowledgeGraphBuilder::new();
        b.add_entity("urn:start", "Bath").unwrap();
        {
            let e = b.add_entity("urn:cand", "Bath, Somerset").unwrap();
            e.add_literal("http://www.georss.org/georss/point", "51.38 -2.36");
            e.short_abstract = Some("Bath is a city in Somerset. Romans built bath houses.".into());
            e.long_abstract =
                Some("Bath is a city. Bath has thermae. People visit Bath often.".into());
            e.page_length = Some(1234);
            e.classes.insert("http://dbpedia.org/ontology/City".into());
            e.classes
                .insert("http://dbpedia.org/ontology/Place".into());
        }
        b.add_link("urn:start", "http://example.org/related", "urn:cand")
            .unwrap();
        let kg = b.build(&GeoPredicateConfig::default()).0;
        let doc = Document {
            id: "d1".into(),
            text: "visiting Bath today".into(),
            ground_truth: Vec::new(),
        };
        let ann = Annotation::new(
            "d1",
            &doc.text,
            (9, 13),
            EntityId::new("urn:start").unwrap(),
            0.9,
        )
        .unwrap();
        let cand = Candidate {
            entity: EntityId::new("urn:cand").unwrap(),
            coordinate: kg.coordinate(&EntityId::new("urn:cand").unwrap()).unwrap(),
            hop: Some(1),
            expansion_rank: 1,
            expansion_rank_onlygeo: 0,
        };
        (kg, doc, ann, cand)
    }

    #[test]
    fn identity_pair_features() {
        let (kg, doc, ann, mut cand) = fixture();
        // Make the candidate label equal the anchor for this check.
        let mut b = KnowledgeGraphBuilder::new();
        b.add_entity("urn:start", "Bath").unwrap();
        let e = b.add_entity("urn:cand", "Bath").unwrap();
        e.add_literal("http://www.georss.org/georss/point", "51.38 -2.36");
        let kg2 = b.build(&GeoPredicateConfig::default()).0;
        cand.coordinate = kg2.coordinate(&cand.entity).unwrap();
        let map = SuperclassMap::default();
        let inputs = FeatureInputs {
            kg: &kg2,
            embeddings: None,
            context: None,
            superclass_map: &map,
        };
        let tag = fallback_tag(&doc, &ann);
        let fv = compute_features(&ann, &cand, Some(&tag), &inputs);
        assert_eq!(fv.edit_from_anchor, 0.0);
        assert_eq!(fv.edit_ratio_from_anchor, 0.0);
        assert_eq!(fv.len_ratio, 1.0);
        drop(kg);
    }

    #[test]
    fn multi_token_candidate_label() {
        let (kg, doc, ann, cand) = fixture();
        let map = SuperclassMap::default();
        let inputs = FeatureInputs {
            kg: &kg,
            embeddings: None,
            context: None,
            superclass_map: &map,
        };
        let tag = fallback_tag(&doc, &ann);
        let fv = compute_features(&ann, &cand, Some(&tag), &inputs);
        assert_eq!(fv.num_tokens_candidate_label, 2.0);
        assert_eq!(fv.edit_from_anchor, 10.0);
        assert_eq!(fv.num_of_classes, 2.0);
        assert_eq!(fv.page_length, 1234.0);
        assert_eq!(fv.page_degree, 1.0);
        assert_eq!(fv.superclass, SuperclassBucket::Place as u16);
        // "Bath" appears case-sensitively once in the short abstract and
        // "bath" once more case-insensitively.
        assert_eq!(fv.anchor_in_short_abstract, 1.0);
        assert_eq!(fv.anchor_in_short_abstract_ci, 2.0);
        assert_eq!(fv.anchor_in_long_abstract, 3.0);
        assert!(fv.is_finite());
        assert_eq!(fv.logical_values().len(), 31);
    }

    #[test]
    fn feature_matrix_export_has_31_columns_plus_label() {
        let (kg, doc, ann, cand) = fixture();
        let map = SuperclassMap::default();
        let inputs = FeatureInputs {
            kg: &kg,
            embeddings: None,
            context: None,
            superclass_map: &map,
        };
        let tag = fallback_tag(&doc, &ann);
        let fv = compute_features(&ann, &cand, Some(&tag), &inputs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matrix.csv");
        export_feature_matrix(&path, &[(fv.clone(), 5.0), (fv, 0.0)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), 32);
        assert_eq!(header[0], "confidence");
        assert_eq!(header[31], "label");
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn dense_width_is_97() {
        let schema = FeatureSchema::get();
        assert_eq!(schema.feature_count(), 31);
        assert_eq!(schema.dense_width(), 97);
        let groups_sum: usize = FeatureGroup::ALL.iter().map(|g| g.cardinality()).sum();
        assert_eq!(groups_sum, 31);
        // Column ownership round-trips through spans.
        for logical in 0..31 {
            let (start, width) = schema.span(logical);
            for col in start..start + width {
                assert_eq!(schema.logical_of_column(col), logical);
            }
        }
    }

    #[test]
    fn one_hot_sets_single_column() {
        let (kg, doc, ann, cand) = fixture();
        let map = SuperclassMap::default();
        let inputs = FeatureInputs {
            kg: &kg,
            embeddings: None,
            context: None,
            superclass_map: &map,
        };
        let tag = fallback_tag(&doc, &ann);
        let fv = compute_features(&ann, &cand, Some(&tag), &inputs);
        let dense = fv.to_dense();
        let schema = FeatureSchema::get();
        for logical in [14usize, 23, 24, 27] {
            let (start, width) = schema.span(logical);
            let ones: usize = dense[start..start + width]
                .iter()
                .filter(|v| **v == 1.0)
                .count();
            assert_eq!(ones, 1, "feature {logical} one-hot");
        }
    }

    proptest! {
        #[test]
        fn edit_distance_is_a_metric(a in ".{0,12}", b in ".{0,12}", c in ".{0,12}") {
            let dab = edit_distance(&a, &b);
            let dba = edit_distance(&b, &a);
            prop_assert_eq!(dab, dba);
            prop_assert_eq!(edit_distance(&a, &a), 0);
            let dac = edit_distance(&a, &c);
            let dcb = edit_distance(&c, &b);
            prop_assert!(dab <= dac + dcb);
            if a != b {
                prop_assert!(dab >= 1);
            }
        }

        #[test]
        fn ci_counts_dominate_cs_counts(hay in ".{0,40}", needle in ".{1,6}") {
            let cs = count_occurrences(&hay, &needle);
            let ci = count_occurrences_ci(&hay, &needle);
            prop_assert!(ci >= cs);
        }
    }
}
