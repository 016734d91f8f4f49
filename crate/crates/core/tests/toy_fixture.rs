//! Integration tests over the shipped toy fixture graph.

mod common;

use std::path::PathBuf;

use geoparse::annotate::{annotate, build_lexicon};
use geoparse::embed::EmbeddingStore;
use geoparse::expand::{
    expand_latent, expand_spelling, expand_topological, load_expansion_table,
    max_theoretical_recall, precompute_expansions, save_expansion_table, ExpansionConfig,
    SpellingIndex, Strategy, Tiebreak,
};
use geoparse::kg::{load_knowledge_graph, EntityId, GeoPredicateConfig, KnowledgeGraph};
use geoparse::pipeline::{geo_distance, load_dataset, strategy_report};

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/toy")
        .join(name)
}

fn load_toy() -> (KnowledgeGraph, EmbeddingStore) {
    let (kg, stats) =
        load_knowledge_graph(&fixture_path("kg.tsv"), &GeoPredicateConfig::default()).unwrap();
    assert_eq!(stats.geo_range_warnings, 0);
    let store = EmbeddingStore::load(&fixture_path("vectors.tsv")).unwrap();
    (kg, store)
}

fn id(iri: &str) -> EntityId {
    EntityId::new(iri).unwrap()
}

fn labels(kg: &KnowledgeGraph, candidates: &[geoparse::expand::Candidate]) -> Vec<String> {
    candidates
        .iter()
        .map(|c| kg.label(&c.entity).unwrap().to_string())
        .collect()
}

#[test]
fn toy_graph_has_11_entities_8_geo() {
    let (kg, _) = load_toy();
    assert_eq!(kg.len(), 11);
    assert_eq!(kg.geo_len(), 8);
}

#[test]
fn toy_dms_coordinate_parses() {
    let (kg, _) = load_toy();
    let c = kg.coordinate(&id("toy:Bata")).unwrap();
    assert!((c.lat() - 1.8639).abs() < 1e-9);
    assert!((c.lon() - 9.7658).abs() < 1e-9);
}

#[test]
fn toy_spelling_l2_is_bath_bata() {
    let (kg, _) = load_toy();
    let index = SpellingIndex::build(&kg);
    let got = expand_spelling(&kg, &index, &id("toy:bath"), 2, 6).unwrap();
    assert_eq!(labels(&kg, &got), ["Bath", "Bata"]);
    // Bach sits between them in the full ranking but carries no coordinate.
    assert_eq!(got[0].expansion_rank_onlygeo, 0);
    assert_eq!(got[1].expansion_rank_onlygeo, 1);
    assert!(got[1].expansion_rank >= 2);
}

#[test]
fn toy_latent_l2_follows_fixture_vectors() {
    let (kg, store) = load_toy();
    let got = expand_latent(&kg, &store, &id("toy:bath"), 2, 6).unwrap();
    assert_eq!(labels(&kg, &got), ["Hot Springs", "Saturnia"]);
}

#[test]
fn toy_latent_geographic_start_ranks_first() {
    let (kg, store) = load_toy();
    let got = expand_latent(&kg, &store, &id("toy:Bath"), 3, 6).unwrap();
    assert_eq!(got[0].entity, id("toy:Bath"));
    assert_eq!(got[0].hop, Some(0));
    assert_eq!(got[0].expansion_rank, 0);
    // An unknown start is distinguished from a known one without a vector.
    assert!(matches!(
        expand_latent(&kg, &store, &id("toy:nowhere"), 2, 6),
        Err(geoparse::Error::UnknownEntity(_))
    ));
    assert!(matches!(
        expand_latent(&kg, &store, &id("toy:Bach"), 2, 6),
        Err(geoparse::Error::MissingVector(_))
    ));
}

#[test]
fn empty_graph_precomputes_an_empty_table() {
    let kg = geoparse::kg::KnowledgeGraphBuilder::new()
        .build(&GeoPredicateConfig::default())
        .0;
    let config = ExpansionConfig::new(Strategy::Spelling, 3, 6).unwrap();
    let table = precompute_expansions(&kg, &config, None).unwrap();
    assert!(table.is_empty());
}

#[test]
fn toy_topological_vectors() {
    let (kg, store) = load_toy();
    let spe = expand_topological(&kg, Some(&store), &id("toy:bath"), 2, Tiebreak::Spelling, 6)
        .unwrap();
    assert_eq!(labels(&kg, &spe), ["Bath", "Saturnia"]);
    assert_eq!(spe[0].hop, Some(2));
    assert_eq!(spe[1].hop, Some(2));
    let lat = expand_topological(&kg, Some(&store), &id("toy:bath"), 2, Tiebreak::Latent, 6)
        .unwrap();
    assert_eq!(labels(&kg, &lat), ["Saturnia", "Bath"]);
}

#[test]
fn toy_disconnected_start_yields_nothing_topological() {
    let (kg, store) = load_toy();
    // Bach is isolated and has no coordinate of its own.
    let got = expand_topological(&kg, Some(&store), &id("toy:Bach"), 3, Tiebreak::Spelling, 6)
        .unwrap();
    assert!(got.is_empty());
}

#[test]
fn toy_precompute_matches_online_and_caches() {
    let (kg, store) = load_toy();
    let config = ExpansionConfig::new(Strategy::TopologicalSpe, 4, 6).unwrap();
    let table = precompute_expansions(&kg, &config, Some(&store)).unwrap();
    assert_eq!(table.len(), kg.len());
    let index = SpellingIndex::build(&kg);
    for entity in kg.entity_ids() {
        let online = geoparse::expand::expand(&kg, &index, Some(&store), &config, entity).unwrap();
        assert_eq!(table.get(entity).unwrap(), online.as_slice(), "{entity}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expansions.cache");
    save_expansion_table(&table, &path).unwrap();
    let loaded = load_expansion_table(&path).unwrap();
    assert!(loaded.matches_graph(&kg));
    assert_eq!(loaded.len(), table.len());
    for (entity, candidates) in table.entries() {
        assert_eq!(loaded.get(entity).unwrap(), candidates);
    }
    // A truncated cache is rejected.
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert!(load_expansion_table(&path).is_err());
}

#[test]
fn toy_latent_table_skips_vectorless_entities() {
    let (kg, store) = load_toy();
    let config = ExpansionConfig::new(Strategy::LatentSemantic, 3, 6).unwrap();
    let table = precompute_expansions(&kg, &config, Some(&store)).unwrap();
    // Bach, Colorado and Equatorial Guinea have no vectors.
    assert_eq!(table.len(), kg.len() - 3);
    assert!(table.get(&id("toy:Bach")).is_none());
}

#[test]
fn toy_recall_l0_counts_geo_starts_and_grows() {
    let (kg, store) = load_toy();
    let docs = load_dataset(&fixture_path("dataset.jsonl")).unwrap();
    let lexicon = build_lexicon(&kg, Some(fixture_path("aliases.tsv").as_path())).unwrap();
    let mut annotations = Vec::new();
    for doc in &docs {
        annotations.extend(annotate(doc, &lexicon));
    }
    // t1's anchor starts at the bathtub entity (no coordinates); t3's two
    // anchors start at the correct geographic entities.
    let config = ExpansionConfig::new(Strategy::TopologicalSpe, 50, 6).unwrap();
    let table = precompute_expansions(&kg, &config, Some(&store)).unwrap();
    let r0 = max_theoretical_recall(&kg, &table, &docs, &annotations, 0, 50.0);
    assert!((r0 - 2.0 / 3.0).abs() < 1e-12);
    let r2 = max_theoretical_recall(&kg, &table, &docs, &annotations, 2, 50.0);
    assert_eq!(r2, 1.0);
    let mut prev = 0.0;
    for l in 0..=50 {
        let r = max_theoretical_recall(&kg, &table, &docs, &annotations, l, 50.0);
        assert!(r + 1e-12 >= prev, "recall dropped at L={l}");
        prev = r;
    }
}

#[test]
fn toy_strategy_report_is_monotone_and_round() {
    let (kg, store) = load_toy();
    let docs = load_dataset(&fixture_path("dataset.jsonl")).unwrap();
    let lexicon = build_lexicon(&kg, Some(fixture_path("aliases.tsv").as_path())).unwrap();
    let mut annotations = Vec::new();
    for doc in &docs {
        annotations.extend(annotate(doc, &lexicon));
    }
    let report = strategy_report(
        &kg,
        &docs,
        &annotations,
        &Strategy::ALL,
        &[0, 1, 2, 5],
        50.0,
        Some(&store),
        6,
    )
    .unwrap();
    assert_eq!(report.rows.len(), 4);
    // Rows agree with direct per-L recall calls.
    for row in &report.rows {
        for strategy in Strategy::ALL {
            let config = ExpansionConfig::new(strategy, row.l.max(1), 6).unwrap();
            let table = precompute_expansions(&kg, &config, Some(&store)).unwrap();
            let direct =
                max_theoretical_recall(&kg, &table, &docs, &annotations, row.l, 50.0);
            assert_eq!(row.recall[strategy.as_str()], direct, "L={} {strategy}", row.l);
        }
    }
    let csv = report.to_csv();
    assert!(csv.starts_with("l,"));
    assert_eq!(csv.lines().count(), 5);
    // Identical strategies have Jaccard distance 0 at every L.
    let same = strategy_report(
        &kg,
        &docs,
        &annotations,
        &[Strategy::TopologicalSpe, Strategy::TopologicalSpe],
        &[1, 3],
        50.0,
        Some(&store),
        6,
    )
    .unwrap();
    for row in &same.rows {
        for v in row.jaccard.values() {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn toy_same_as_closure_reaches_unloaded_targets() {
    let (kg, _) = load_toy();
    let closure = kg.same_as_closure(&id("toy:Bath"), 3).unwrap();
    assert_eq!(closure, vec![id("http://sws.geonames.org/2656173/")]);
}

#[test]
fn toy_annotation_error_scenario() {
    let (kg, _) = load_toy();
    let docs = load_dataset(&fixture_path("dataset.jsonl")).unwrap();
    let lexicon = build_lexicon(&kg, Some(fixture_path("aliases.tsv").as_path())).unwrap();
    let anns = annotate(&docs[0], &lexicon);
    assert_eq!(anns.len(), 1);
    assert_eq!(anns[0].anchor, "Bath");
    // The alias counts steer the annotator to the bathtub entity.
    assert_eq!(anns[0].start_entity, id("toy:bath"));
    assert!((anns[0].confidence - 0.8).abs() < 1e-12);
    // No annotations at all for the location-free document.
    assert!(annotate(&docs[1], &lexicon).is_empty());
}

#[test]
fn toy_truth_matches_graph_coordinates() {
    let (kg, _) = load_toy();
    let docs = load_dataset(&fixture_path("dataset.jsonl")).unwrap();
    for doc in &docs {
        for truth in &doc.ground_truth {
            let entity = truth.entity.as_ref().unwrap();
            let c = kg.coordinate(entity).unwrap();
            assert!(geo_distance(c, truth.coordinate) < 0.001, "{entity}");
        }
    }
}

#[test]
fn toy_identity_prefix_property() {
    let (kg, store) = load_toy();
    let index = SpellingIndex::build(&kg);
    for l_small in 0..4usize {
        for strategy in Strategy::ALL {
            let config_small = ExpansionConfig::new(strategy, l_small, 6).unwrap();
            let config_large = ExpansionConfig::new(strategy, l_small + 3, 6).unwrap();
            for entity in kg.entity_ids() {
                let small = geoparse::expand::expand(&kg, &index, Some(&store), &config_small, entity);
                let large = geoparse::expand::expand(&kg, &index, Some(&store), &config_large, entity);
                match (small, large) {
                    (Ok(s), Ok(l)) => assert_eq!(s.as_slice(), &l[..s.len().min(l.len())]),
                    (Err(_), Err(_)) => {}
                    other => panic!("prefix mismatch for {entity}: {other:?}"),
                }
            }
        }
    }
}
