//! Pipeline-level integration: selection tail, dedup and degenerate inputs.

mod common;

use geoparse::annotate::{Annotation, Document};
use geoparse::expand::{precompute_expansions, Candidate, ExpansionConfig, Strategy};
use geoparse::features::{FeatureVector, SuperclassMap};
use geoparse::kg::{
    EntityId, GeoPredicateConfig, KnowledgeGraph, KnowledgeGraphBuilder, OntologyMap,
};
use geoparse::pipeline::{
    geoparse_document, predictions_from_scored, PipelineStores, ScoredCandidates, VerticalConfig,
};
use geoparse::select::{
    train, Algorithm, GroupKey, Hyperparameters, LabeledInstance, SelectionModel,
};

fn tiny_graph() -> KnowledgeGraph {
    let mut b = KnowledgeGraphBuilder::new();
    for (iri, label, point) in [
        ("p:a", "Alpha", Some("10.0 10.0")),
        ("p:b", "Beta", Some("10.0 10.0")),
        ("p:c", "Gamma", Some("-20.0 30.0")),
        ("p:hub", "Hub", None),
    ] {
        let e = b.add_entity(iri, label).unwrap();
        if let Some(p) = point {
            e.add_literal("http://www.georss.org/georss/point", p);
        }
    }
    b.add_link("p:hub", "http://example.org/linked", "p:a").unwrap();
    b.add_link("p:hub", "http://example.org/linked", "p:b").unwrap();
    b.build(&GeoPredicateConfig::default()).0
}

/// A constant model: zero trees, base prediction = mean of the single
/// training label, threshold wide open.
fn constant_model(value: f64) -> SelectionModel {
    let instance = LabeledInstance {
        features: FeatureVector::from_logical(&[0.0; 31]),
        label: value,
        group: GroupKey {
            document_id: "d".into(),
            span: (0, 1),
        },
    };
    let ensemble = train(
        &[instance],
        Algorithm::Gbdt,
        &Hyperparameters {
            num_trees: 0,
            ..Hyperparameters::default()
        },
        0,
    )
    .unwrap();
    SelectionModel::uncalibrated(ensemble)
}

fn candidate(kg: &KnowledgeGraph, iri: &str) -> Candidate {
    let id = EntityId::new(iri).unwrap();
    Candidate {
        coordinate: kg.coordinate(&id).unwrap(),
        entity: id,
        hop: Some(1),
        expansion_rank: 1,
        expansion_rank_onlygeo: 0,
    }
}

#[test]
fn coinciding_coordinates_are_deduplicated() {
    let kg = tiny_graph();
    let model = constant_model(1.0);
    let table = precompute_expansions(
        &kg,
        &ExpansionConfig::new(Strategy::TopologicalSpe, 3, 6).unwrap(),
        None,
    )
    .unwrap();
    let superclass = SuperclassMap::default();
    let ontology = OntologyMap::default();
    let stores = PipelineStores {
        kg: &kg,
        table: &table,
        model: &model,
        embeddings: None,
        tags: None,
        context: None,
        superclass_map: &superclass,
        ontology_map: &ontology,
        size_l: 3,
        vertical: VerticalConfig::default(),
    };
    let text = "Alpha and Beta share a spot";
    let ann = |span: (usize, usize), start: &str| {
        Annotation::new("d", text, span, EntityId::new(start).unwrap(), 0.9).unwrap()
    };
    // Two anchors whose winning candidates carry the same coordinate, plus
    // one distinct location.
    let scored = vec![
        ScoredCandidates {
            annotation: ann((0, 5), "p:a"),
            scored: vec![(candidate(&kg, "p:a"), 0.8)],
        },
        ScoredCandidates {
            annotation: ann((10, 14), "p:b"),
            scored: vec![(candidate(&kg, "p:b"), 0.6)],
        },
        ScoredCandidates {
            annotation: ann((21, 25), "p:c"),
            scored: vec![(candidate(&kg, "p:c"), 0.4)],
        },
    ];
    let predictions = predictions_from_scored(&scored, &stores);
    assert_eq!(predictions.len(), 2, "coinciding pair collapses to one");
    assert_eq!(predictions[0].entity.as_str(), "p:a");
    assert!((predictions[0].score - 0.8).abs() < 1e-12, "higher score kept");
    assert_eq!(predictions[1].entity.as_str(), "p:c");
}

#[test]
fn document_without_annotations_yields_no_predictions() {
    let kg = tiny_graph();
    let model = constant_model(1.0);
    let table = precompute_expansions(
        &kg,
        &ExpansionConfig::new(Strategy::TopologicalSpe, 3, 6).unwrap(),
        None,
    )
    .unwrap();
    let superclass = SuperclassMap::default();
    let ontology = OntologyMap::default();
    let stores = PipelineStores {
        kg: &kg,
        table: &table,
        model: &model,
        embeddings: None,
        tags: None,
        context: None,
        superclass_map: &superclass,
        ontology_map: &ontology,
        size_l: 3,
        vertical: VerticalConfig::default(),
    };
    let doc = Document {
        id: "d".into(),
        text: "nothing to see".into(),
        ground_truth: vec![],
    };
    assert!(geoparse_document(&doc, &[], &stores).is_empty());
}

#[test]
fn vertical_fallback_resolves_coordinates_at_l0() {
    // `p:x` has no coordinate of its own but is sameAs an entity that does.
    let mut b = KnowledgeGraphBuilder::new();
    b.add_entity("p:x", "Xanadu").unwrap();
    {
        let e = b.add_entity("p:geo", "Xanadu (place)").unwrap();
        e.add_literal("http://www.georss.org/georss/point", "42.0 7.0");
    }
    b.entity_mut("p:x")
        .unwrap()
        .same_as
        .insert(EntityId::new("p:geo").unwrap());
    let kg = b.build(&GeoPredicateConfig::default()).0;
    let model = constant_model(1.0);
    let table = precompute_expansions(
        &kg,
        &ExpansionConfig::new(Strategy::TopologicalSpe, 1, 6).unwrap(),
        None,
    )
    .unwrap();
    let superclass = SuperclassMap::default();
    let ontology = OntologyMap::default();
    let mut stores = PipelineStores {
        kg: &kg,
        table: &table,
        model: &model,
        embeddings: None,
        tags: None,
        context: None,
        superclass_map: &superclass,
        ontology_map: &ontology,
        size_l: 0,
        vertical: VerticalConfig::default(),
    };
    let text = "Xanadu calling";
    let doc = Document {
        id: "d".into(),
        text: text.into(),
        ground_truth: vec![],
    };
    let ann = Annotation::new("d", text, (0, 6), EntityId::new("p:x").unwrap(), 0.9).unwrap();
    let predictions = geoparse_document(&doc, std::slice::from_ref(&ann), &stores);
    assert_eq!(predictions.len(), 1);
    assert_eq!(predictions[0].coordinate.lat(), 42.0);
    assert_eq!(predictions[0].entity.as_str(), "p:x");
    // With vertical expansion disabled the coordinate cannot be resolved.
    stores.vertical = VerticalConfig {
        enabled: false,
        max_depth: 3,
    };
    assert!(geoparse_document(&doc, std::slice::from_ref(&ann), &stores).is_empty());
}
