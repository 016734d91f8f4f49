//! Confidence-threshold calibration on a validation set.
//!
//! The threshold sweep evaluates the full geoparsing decision rule (argmax
//! per annotation, discard below threshold, per-document dedup, greedy
//! one-to-one matching) at every distinct winning score plus the −∞
//! keep-everything surrogate, and returns the F1-maximizing value.

use crate::error::{Error, Result};
use crate::expand::Candidate;
use crate::kg::{GeoCoordinate, Granularity};
use crate::pipeline::metrics::{self, MatchCounts, DEDUP_TOLERANCE_KM};
use crate::select::argmax_candidate;

/// One annotation's scored candidates.
#[derive(Debug, Clone)]
pub struct ScoredAnnotation {
    pub candidates: Vec<(Candidate, f64)>,
}

/// One validation document: its ground-truth coordinates and the scored
/// candidate sets of its annotations.
#[derive(Debug, Clone, Default)]
pub struct CalibrationDoc {
    pub truths: Vec<GeoCoordinate>,
    pub annotations: Vec<ScoredAnnotation>,
}

/// Sweeps the confidence threshold over `{−∞} ∪ {distinct winning scores}`
/// and returns the value maximizing F1 under the full decision rule.
/// Thresholds producing identical confusion counts collapse to the lowest
/// value of their run; among distinct outcomes that tie on F1, the higher
/// threshold wins (it prunes more, favoring precision on unseen data).
pub fn calibrate_threshold(docs: &[CalibrationDoc], threshold_km: f64) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot calibrate on an empty validation set"));
    }
    // Winners: per document, the argmax candidate of each annotation.
    let winners: Vec<Vec<(GeoCoordinate, f64)>> = docs
        .iter()
        .map(|doc| {
            doc.annotations
                .iter()
                .filter_map(|a| argmax_candidate(&a.candidates))
                .map(|(c, s)| (c.coordinate, *s))
                .collect()
        })
        .collect();
    let mut sweep: Vec<f64> = vec![f64::NEG_INFINITY];
    {
        let mut scores: Vec<f64> = winners
            .iter()
            .flatten()
            .map(|(_, s)| *s)
            .collect();
        scores.sort_by(f64::total_cmp);
        scores.dedup();
        sweep.extend(scores);
    }
    let outcome_at = |c_th: f64| -> MatchCounts {
        let mut total = MatchCounts::default();
        for (doc, doc_winners) in docs.iter().zip(&winners) {
            let surviving: Vec<(GeoCoordinate, f64)> = doc_winners
                .iter()
                .copied()
                .filter(|(_, s)| *s >= c_th)
                .collect();
            let deduped = metrics::dedup_nearby(surviving, |p| p.0, |p| p.1, DEDUP_TOLERANCE_KM);
            let preds: Vec<(GeoCoordinate, Granularity)> = deduped
                .iter()
                .map(|(c, _)| (*c, Granularity::Unknown))
                .collect();
            let truths: Vec<(GeoCoordinate, Granularity)> = doc
                .truths
                .iter()
                .map(|c| (*c, Granularity::Unknown))
                .collect();
            let (counts, _) = metrics::match_document(&preds, &truths, threshold_km, false);
            total.add(counts);
        }
        total
    };
    // Collapse runs of identical outcomes to their first (lowest) threshold.
    let mut runs: Vec<(f64, MatchCounts)> = Vec::new();
    for &c_th in &sweep {
        let counts = outcome_at(c_th);
        match runs.last() {
            Some((_, last)) if *last == counts => {}
            _ => runs.push((c_th, counts)),
        }
    }
    let mut best: Option<(f64, f64)> = None; // (threshold, f1)
    for (c_th, counts) in runs {
        let f1 = metrics::f1(counts.tp, counts.fp, counts.fn_);
        let better = match best {
            None => true,
            // Ties between distinct outcomes go to the larger threshold.
            Some((_, best_f1)) => f1 >= best_f1,
        };
        if better {
            best = Some((c_th, f1));
        }
    }
    Ok(best.expect("sweep contains at least the -inf surrogate").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::EntityId;

    fn candidate(iri: &str, lat: f64, lon: f64) -> Candidate {
        Candidate {
            entity: EntityId::new(iri).unwrap(),
            coordinate: GeoCoordinate::new(lat, lon).unwrap(),
            hop: Some(1),
            expansion_rank: 0,
            expansion_rank_onlygeo: 0,
        }
    }

    fn doc(truth: Option<(f64, f64)>, sets: Vec<Vec<(Candidate, f64)>>) -> CalibrationDoc {
        CalibrationDoc {
            truths: truth
                .map(|(lat, lon)| vec![GeoCoordinate::new(lat, lon).unwrap()])
                .unwrap_or_default(),
            annotations: sets
                .into_iter()
                .map(|candidates| ScoredAnnotation { candidates })
                .collect(),
        }
    }

    #[test]
    fn all_correct_yields_negative_infinity() {
        let docs = vec![
            doc(
                Some((10.0, 10.0)),
                vec![vec![(candidate("urn:a", 10.0, 10.0), 3.0)]],
            ),
            doc(
                Some((20.0, 20.0)),
                vec![vec![(candidate("urn:b", 20.0, 20.0), 1.0)]],
            ),
        ];
        let c_th = calibrate_threshold(&docs, 50.0).unwrap();
        assert_eq!(c_th, f64::NEG_INFINITY);
    }

    #[test]
    fn threshold_rises_above_a_wrong_high_scorer() {
        // Three correct predictions (2, 3, 7) and one wrong one (5) whose
        // document still has a truth: dropping the wrong prediction trades
        // an FP for an FN, so pruning never helps here.
        let docs = vec![
            doc(
                Some((10.0, 10.0)),
                vec![vec![(candidate("urn:good1", 10.0, 10.0), 2.0)]],
            ),
            doc(
                Some((20.0, 20.0)),
                vec![vec![(candidate("urn:good2", 20.0, 20.0), 3.0)]],
            ),
            doc(
                // Truth far away from the wrong prediction.
                Some((-40.0, -40.0)),
                vec![vec![(candidate("urn:wrong", 60.0, 60.0), 5.0)]],
            ),
            doc(
                Some((50.0, 50.0)),
                vec![vec![(candidate("urn:good3", 50.0, 50.0), 7.0)]],
            ),
        ];
        // c_th ≤ 2 → TP=3 FP=1 FN=1 → F1 = 0.75   (optimum: keep all)
        // c_th = 3 → TP=2 FP=1 FN=2 → F1 ≈ 0.571
        // c_th = 5 → TP=1 FP=1 FN=3 → F1 ≈ 0.333
        // c_th = 7 → TP=1 FP=0 FN=3 → F1 = 0.4
        let c_th = calibrate_threshold(&docs, 50.0).unwrap();
        assert_eq!(c_th, f64::NEG_INFINITY);

        // With the wrong prediction on a truth-free document, pruning it
        // removes an FP at no recall cost and the threshold rises above
        // its score.
        let docs = vec![
            doc(
                Some((10.0, 10.0)),
                vec![vec![(candidate("urn:good1", 10.0, 10.0), 6.0)]],
            ),
            doc(
                Some((20.0, 20.0)),
                vec![vec![(candidate("urn:good2", 20.0, 20.0), 7.0)]],
            ),
            doc(None, vec![vec![(candidate("urn:wrong", 60.0, 60.0), 5.0)]]),
        ];
        // c_th ≤ 5 → TP=2 FP=1 FN=0 → F1 = 4/5
        // c_th = 6 → TP=2 FP=0 FN=0 → F1 = 1     ← optimum, rises above 5
        // c_th = 7 → TP=1 FP=0 FN=1 → F1 = 2/3
        let c_th = calibrate_threshold(&docs, 50.0).unwrap();
        assert_eq!(c_th, 6.0);
    }

    #[test]
    fn single_candidate_within_threshold_is_perfect_at_its_score() {
        let docs = vec![doc(
            Some((10.0, 10.0)),
            vec![vec![(candidate("urn:a", 10.01, 10.0), 1.5)]],
        )];
        let c_th = calibrate_threshold(&docs, 50.0).unwrap();
        assert!(c_th <= 1.5);
    }

    #[test]
    fn empty_validation_set_errors() {
        assert!(calibrate_threshold(&[], 50.0).is_err());
    }
}
