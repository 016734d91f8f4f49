//! End-to-end orchestration: annotate → expand → score → select → resolve
//! coordinates, plus the evaluation protocol around it.

pub mod metrics;
pub mod report;
pub mod split;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::{Annotation, Document, GroundTruthLocation};
use crate::embed::EmbeddingStore;
use crate::error::{Error, Result};
use crate::expand::{
    jaccard_distance, max_theoretical_recall, precompute_expansions, Candidate, ExpansionConfig,
    ExpansionTable, Strategy,
};
use crate::features::{compute_features, ContextVectors, FeatureInputs, SuperclassMap, TagMap};
use crate::kg::{granularity_of, EntityId, GeoCoordinate, Granularity, KnowledgeGraph, OntologyMap};
use crate::select::{select_best, SelectionModel};

pub use metrics::{dedup_nearby, geo_distance, MatchCounts, DEDUP_TOLERANCE_KM, EARTH_RADIUS_KM};
pub use report::{evaluate, EvaluationReport, MetricBlock};
pub use split::{stratified_split, DatasetSplit};

/// One geotagged anchor of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoPrediction {
    pub document_id: String,
    pub span: (usize, usize),
    pub anchor: String,
    pub entity: EntityId,
    pub coordinate: GeoCoordinate,
    pub score: f64,
    pub granularity: Granularity,
}

/// Vertical expansion applied after selection: when the winning entity has
/// no direct coordinate, its `sameAs` closure is scanned (closure order,
/// direct coordinate first) for one.
#[derive(Debug, Clone, Copy)]
pub struct VerticalConfig {
    pub enabled: bool,
    pub max_depth: u32,
}

impl Default for VerticalConfig {
    fn default() -> Self {
        VerticalConfig {
            enabled: true,
            max_depth: 3,
        }
    }
}

/// Read-only stores the pipeline runs against.
pub struct PipelineStores<'a> {
    pub kg: &'a KnowledgeGraph,
    pub table: &'a ExpansionTable,
    pub model: &'a SelectionModel,
    pub embeddings: Option<&'a EmbeddingStore>,
    pub tags: Option<&'a TagMap>,
    pub context: Option<&'a ContextVectors>,
    pub superclass_map: &'a SuperclassMap,
    pub ontology_map: &'a OntologyMap,
    /// Candidates taken per annotation; `0` is the no-expansion baseline
    /// where only the starting entity itself is considered. Must not exceed
    /// the table's configured size.
    pub size_l: usize,
    pub vertical: VerticalConfig,
}

/// Scored candidate set of one annotation, kept for tracing and threshold
/// calibration.
#[derive(Debug, Clone)]
pub struct ScoredCandidates {
    pub annotation: Annotation,
    pub scored: Vec<(Candidate, f64)>,
}

/// Resolves the coordinate of an entity: its own geo-index entry first,
/// then (when vertical expansion is enabled) the first coordinate along the
/// `sameAs` closure.
fn resolve_coordinate(
    kg: &KnowledgeGraph,
    id: &EntityId,
    vertical: VerticalConfig,
) -> Option<GeoCoordinate> {
    if let Some(c) = kg.coordinate(id) {
        return Some(c);
    }
    if !vertical.enabled {
        return None;
    }
    let closure = kg.same_as_closure(id, vertical.max_depth).ok()?;
    closure.iter().find_map(|e| kg.coordinate(e))
}

/// Candidate list for one annotation under the configured expansion size.
fn candidates_for(annotation: &Annotation, stores: &PipelineStores<'_>) -> Vec<Candidate> {
    if stores.size_l == 0 {
        let start = &annotation.start_entity;
        if !stores.kg.contains(start) {
            return Vec::new();
        }
        return resolve_coordinate(stores.kg, start, stores.vertical)
            .map(|coordinate| {
                vec![Candidate {
                    entity: start.clone(),
                    coordinate,
                    hop: Some(0),
                    expansion_rank: 0,
                    expansion_rank_onlygeo: 0,
                }]
            })
            .unwrap_or_default();
    }
    stores.table.prefix(&annotation.start_entity, stores.size_l).to_vec()
}

/// Scores every candidate of every annotation of one document.
pub fn score_document(
    doc: &Document,
    annotations: &[Annotation],
    stores: &PipelineStores<'_>,
) -> Vec<ScoredCandidates> {
    let inputs = FeatureInputs {
        kg: stores.kg,
        embeddings: stores.embeddings,
        context: stores.context,
        superclass_map: stores.superclass_map,
    };
    annotations
        .iter()
        .map(|annotation| {
            let fallback;
            let tag = match stores.tags.and_then(|m| {
                m.get(&(
                    annotation.document_id.clone(),
                    annotation.span.0,
                    annotation.span.1,
                ))
            }) {
                Some(t) => t,
                None => {
                    fallback = crate::features::fallback_tag(doc, annotation);
                    &fallback
                }
            };
            let scored = candidates_for(annotation, stores)
                .into_iter()
                .map(|candidate| {
                    let fv = compute_features(annotation, &candidate, Some(tag), &inputs);
                    let score = stores.model.ensemble.predict(&fv);
                    (candidate, score)
                })
                .collect();
            ScoredCandidates {
                annotation: annotation.clone(),
                scored,
            }
        })
        .collect()
}

/// Full geoparse of one document: one prediction per annotation whose best
/// candidate clears the threshold, deduplicated within the document
/// (coordinates closer than [`DEDUP_TOLERANCE_KM`] keep the higher score)
/// and sorted by span start.
pub fn geoparse_document(
    doc: &Document,
    annotations: &[Annotation],
    stores: &PipelineStores<'_>,
) -> Vec<GeoPrediction> {
    let scored = score_document(doc, annotations, stores);
    predictions_from_scored(&scored, stores)
}

/// The selection and dedup tail of the pipeline, reusable from calibration.
pub fn predictions_from_scored(
    scored: &[ScoredCandidates],
    stores: &PipelineStores<'_>,
) -> Vec<GeoPrediction> {
    let mut predictions: Vec<GeoPrediction> = scored
        .iter()
        .filter_map(|set| {
            let (winner, score) = select_best(stores.model, &set.scored)?;
            let granularity = stores
                .kg
                .entity(&winner.entity)
                .map(|e| granularity_of(e, stores.ontology_map))
                .unwrap_or(Granularity::Unknown);
            Some(GeoPrediction {
                document_id: set.annotation.document_id.clone(),
                span: set.annotation.span,
                anchor: set.annotation.anchor.clone(),
                entity: winner.entity.clone(),
                coordinate: winner.coordinate,
                score: *score,
                granularity,
            })
        })
        .collect();
    predictions = dedup_nearby(
        predictions,
        |p| p.coordinate,
        |p| p.score,
        DEDUP_TOLERANCE_KM,
    );
    predictions.sort_by(|a, b| a.span.0.cmp(&b.span.0).then(a.span.1.cmp(&b.span.1)));
    predictions
}

/// Geoparses a corpus, parallelized per document with deterministic output
/// order. Returns the predictions and the mean wall-clock seconds per
/// document.
pub fn geoparse_corpus(
    docs: &[&Document],
    annotations_by_doc: &BTreeMap<String, Vec<Annotation>>,
    stores: &PipelineStores<'_>,
) -> (Vec<GeoPrediction>, f64) {
    let started = Instant::now();
    let per_doc: Vec<Vec<GeoPrediction>> = docs
        .par_iter()
        .map(|doc| {
            let annotations = annotations_by_doc
                .get(&doc.id)
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            geoparse_document(doc, annotations, stores)
        })
        .collect();
    let elapsed = started.elapsed().as_secs_f64();
    let predictions = per_doc.into_iter().flatten().collect();
    let per_doc_secs = if docs.is_empty() {
        0.0
    } else {
        elapsed / docs.len() as f64
    };
    (predictions, per_doc_secs)
}

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    id: String,
    text: String,
    #[serde(default)]
    locations: Vec<LocationRecord>,
}

#[derive(Serialize, Deserialize)]
struct LocationRecord {
    lat: f64,
    lon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    entity_iri: Option<String>,
}

/// Reads a JSON-lines dataset (`{"id", "text", "locations": [{"lat",
/// "lon", "entity_iri"?}]}`). Ids must be unique, coordinates in range.
pub fn load_dataset(path: &Path) -> Result<Vec<Document>> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut docs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(raw).map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::parse(
                &file,
                line_no,
                format!("duplicate document id `{}`", record.id),
            ));
        }
        let mut ground_truth = Vec::new();
        for loc in record.locations {
            let coordinate = GeoCoordinate::new(loc.lat, loc.lon)
                .map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
            let entity = match loc.entity_iri {
                Some(iri) => {
                    Some(EntityId::new(iri).map_err(|e| Error::parse(&file, line_no, e.to_string()))?)
                }
                None => None,
            };
            ground_truth.push(GroundTruthLocation { coordinate, entity });
        }
        docs.push(Document {
            id: record.id,
            text: record.text,
            ground_truth,
        });
    }
    Ok(docs)
}

pub fn save_dataset(path: &Path, docs: &[Document]) -> Result<()> {
    let mut out = String::new();
    for doc in docs {
        let record = DatasetRecord {
            id: doc.id.clone(),
            text: doc.text.clone(),
            locations: doc
                .ground_truth
                .iter()
                .map(|t| LocationRecord {
                    lat: t.coordinate.lat(),
                    lon: t.coordinate.lon(),
                    entity_iri: t.entity.as_ref().map(|e| e.as_str().to_string()),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("dataset record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    doc_id: String,
    start: usize,
    end: usize,
    anchor: String,
    entity_iri: String,
    lat: f64,
    lon: f64,
    score: f64,
    granularity: String,
}

pub fn write_predictions(path: &Path, predictions: &[GeoPrediction]) -> Result<()> {
    let mut out = String::new();
    for p in predictions {
        let record = PredictionRecord {
            doc_id: p.document_id.clone(),
            start: p.span.0,
            end: p.span.1,
            anchor: p.anchor.clone(),
            entity_iri: p.entity.as_str().to_string(),
            lat: p.coordinate.lat(),
            lon: p.coordinate.lon(),
            score: p.score,
            granularity: p.granularity.as_str().to_string(),
        };
        out.push_str(&serde_json::to_string(&record).expect("prediction serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path) -> Result<Vec<GeoPrediction>> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut out = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(raw).map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
        let coordinate = GeoCoordinate::new(record.lat, record.lon)
            .map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
        let granularity = Granularity::parse(&record.granularity).ok_or_else(|| {
            Error::parse(&file, line_no, format!("unknown granularity `{}`", record.granularity))
        })?;
        out.push(GeoPrediction {
            document_id: record.doc_id,
            span: (record.start, record.end),
            anchor: record.anchor,
            entity: EntityId::new(record.entity_iri)
                .map_err(|e| Error::parse(&file, line_no, e.to_string()))?,
            coordinate,
            score: record.score,
            granularity,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct TraceCandidate<'a> {
    entity_iri: &'a str,
    score: f64,
    hop: Option<u32>,
    expansion_rank: usize,
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    doc_id: &'a str,
    start: usize,
    end: usize,
    anchor: &'a str,
    start_entity: &'a str,
    candidates: Vec<TraceCandidate<'a>>,
}

/// Writes one JSON line per annotation with its scored candidate list, for
/// debugging selection behavior.
pub fn write_trace(path: &Path, scored: &[ScoredCandidates]) -> Result<()> {
    let mut out = String::new();
    for set in scored {
        let record = TraceRecord {
            doc_id: &set.annotation.document_id,
            start: set.annotation.span.0,
            end: set.annotation.span.1,
            anchor: &set.annotation.anchor,
            start_entity: set.annotation.start_entity.as_str(),
            candidates: set
                .scored
                .iter()
                .map(|(c, s)| TraceCandidate {
                    entity_iri: c.entity.as_str(),
                    score: *s,
                    hop: c.hop,
                    expansion_rank: c.expansion_rank,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("trace serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One row of the strategy comparison: recall per strategy and mean
/// pairwise Jaccard distance per strategy pair, at one expansion size.
#[derive(Debug, Clone, Serialize)]
pub struct StrategyReportRow {
    pub l: usize,
    pub recall: BTreeMap<String, f64>,
    pub jaccard: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyReport {
    pub threshold_km: f64,
    pub rows: Vec<StrategyReportRow>,
}

impl StrategyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l");
        if let Some(first) = self.rows.first() {
            for name in first.recall.keys() {
                out.push_str(&format!(",recall_{name}"));
            }
            for name in first.jaccard.keys() {
                out.push_str(&format!(",jaccard_{name}"));
            }
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.l.to_string());
            for v in row.recall.values() {
                out.push_str(&format!(",{v}"));
            }
            for v in row.jaccard.values() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Computes maximum-theoretical-recall curves for each strategy and mean
/// Jaccard-distance curves for each strategy pair, over the given expansion
/// sizes. Recall columns are checked to be monotone non-decreasing in `L`.
#[allow(clippy::too_many_arguments)]
pub fn strategy_report(
    kg: &KnowledgeGraph,
    docs: &[Document],
    annotations: &[Annotation],
    strategies: &[Strategy],
    l_values: &[usize],
    threshold_km: f64,
    embeddings: Option<&EmbeddingStore>,
    max_hops: u32,
) -> Result<StrategyReport> {
    let mut ls: Vec<usize> = l_values.to_vec();
    ls.sort_unstable();
    ls.dedup();
    let max_l = ls.iter().copied().max().unwrap_or(0);
    let mut tables: BTreeMap<Strategy, ExpansionTable> = BTreeMap::new();
    for strategy in strategies {
        let config = ExpansionConfig::new(*strategy, max_l.max(1), max_hops)?;
        tables.insert(*strategy, precompute_expansions(kg, &config, embeddings)?);
    }
    let mut rows = Vec::new();
    let mut last_recall: BTreeMap<String, f64> = BTreeMap::new();
    for &l in &ls {
        let mut recall = BTreeMap::new();
        for strategy in strategies {
            let r = max_theoretical_recall(kg, &tables[strategy], docs, annotations, l, threshold_km);
            recall.insert(strategy.as_str().to_string(), r);
        }
        for (name, r) in &recall {
            if let Some(prev) = last_recall.get(name) {
                if r + 1e-12 < *prev {
                    return Err(Error::invalid(format!(
                        "recall of {name} decreased from {prev} to {r} at L={l}"
                    )));
                }
            }
        }
        last_recall = recall.clone();
        let mut jaccard = BTreeMap::new();
        for (i, a) in strategies.iter().enumerate() {
            for b in strategies.iter().skip(i + 1) {
                let mut total = 0.0;
                let mut n = 0usize;
                for ann in annotations {
                    let set_a: std::collections::BTreeSet<EntityId> = tables[a]
                        .prefix(&ann.start_entity, l)
                        .iter()
                        .map(|c| c.entity.clone())
                        .collect();
                    let set_b: std::collections::BTreeSet<EntityId> = tables[b]
                        .prefix(&ann.start_entity, l)
                        .iter()
                        .map(|c| c.entity.clone())
                        .collect();
                    total += jaccard_distance(&set_a, &set_b);
                    n += 1;
                }
                let mean = if n == 0 { 0.0 } else { total / n as f64 };
                jaccard.insert(format!("{}__{}", a.as_str(), b.as_str()), mean);
            }
        }
        rows.push(StrategyReportRow { l, recall, jaccard });
    }
    Ok(StrategyReport {
        threshold_km,
        rows,
    })
}
