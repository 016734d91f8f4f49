//! Evaluation report: matching-based counts and derived metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotate::Document;
use crate::error::{Error, Result};
use crate::kg::{granularity_of, Granularity, KnowledgeGraph, OntologyMap};
use crate::pipeline::metrics::{self, MatchCounts};
use crate::pipeline::GeoPrediction;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricBlock {
    pub fn from_counts(c: MatchCounts) -> Self {
        MetricBlock {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: metrics::precision(c.tp, c.fp),
            recall: metrics::recall(c.tp, c.fn_),
            f1: metrics::f1(c.tp, c.fp, c.fn_),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(flatten)]
    pub overall: MetricBlock,
    /// Breakdown by granularity level: true positives and false negatives
    /// are attributed to the truth's level, false positives to the
    /// prediction's level.
    pub per_granularity: BTreeMap<String, MetricBlock>,
    /// Mean wall-clock seconds per document of the geoparse phase that
    /// produced the predictions; 0 when the evaluation input was a file.
    pub elapsed_per_doc_secs: f64,
}

impl EvaluationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,tp,fp,fn,precision,recall,f1\n");
        let mut row = |name: &str, m: &MetricBlock| {
            out.push_str(&format!(
                "{name},{},{},{},{},{},{}\n",
                m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
            ));
        };
        row("overall", &self.overall);
        for (level, block) in &self.per_granularity {
            row(level, block);
        }
        out
    }
}

/// Computes the report for a set of per-document predictions against the
/// documents' ground truth. Predictions for unknown document ids are an
/// error. With `granularity_aware`, matches additionally require the
/// predicted granularity to equal the truth's granularity.
pub fn evaluate(
    predictions: &[GeoPrediction],
    docs: &[Document],
    kg: Option<&KnowledgeGraph>,
    ontology: &OntologyMap,
    threshold_km: f64,
    granularity_aware: bool,
) -> Result<EvaluationReport> {
    if threshold_km <= 0.0 {
        return Err(Error::invalid("threshold must be positive"));
    }
    let mut by_doc: BTreeMap<&str, Vec<&GeoPrediction>> = BTreeMap::new();
    for p in predictions {
        by_doc.entry(p.document_id.as_str()).or_default().push(p);
    }
    let known: std::collections::BTreeSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    if let Some(unknown) = by_doc.keys().find(|id| !known.contains(**id)) {
        return Err(Error::invalid(format!(
            "predictions reference unknown document `{unknown}`"
        )));
    }
    let mut total = MatchCounts::default();
    let mut per_level: BTreeMap<Granularity, MatchCounts> = BTreeMap::new();
    for doc in docs {
        let preds: Vec<(crate::kg::GeoCoordinate, Granularity)> = by_doc
            .get(doc.id.as_str())
            .map(|v| v.iter().map(|p| (p.coordinate, p.granularity)).collect())
            .unwrap_or_default();
        let truths: Vec<(crate::kg::GeoCoordinate, Granularity)> = doc
            .ground_truth
            .iter()
            .map(|t| {
                let level = t
                    .entity
                    .as_ref()
                    .and_then(|id| kg.and_then(|g| g.entity(id)))
                    .map(|e| granularity_of(e, ontology))
                    .unwrap_or(Granularity::Unknown);
                (t.coordinate, level)
            })
            .collect();
        let (counts, matched) = metrics::match_document(&preds, &truths, threshold_km, granularity_aware);
        total.add(counts);
        let mut pred_matched = vec![false; preds.len()];
        let mut truth_matched = vec![false; truths.len()];
        for (pi, ti) in matched {
            pred_matched[pi] = true;
            truth_matched[ti] = true;
            per_level.entry(truths[ti].1).or_default().tp += 1;
        }
        for (ti, (_, level)) in truths.iter().enumerate() {
            if !truth_matched[ti] {
                per_level.entry(*level).or_default().fn_ += 1;
            }
        }
        for (pi, (_, level)) in preds.iter().enumerate() {
            if !pred_matched[pi] {
                per_level.entry(*level).or_default().fp += 1;
            }
        }
    }
    let per_granularity = per_level
        .into_iter()
        .map(|(level, counts)| (level.as_str().to_string(), MetricBlock::from_counts(counts)))
        .collect();
    Ok(EvaluationReport {
        overall: MetricBlock::from_counts(total),
        per_granularity,
        elapsed_per_doc_secs: 0.0,
    })
}
