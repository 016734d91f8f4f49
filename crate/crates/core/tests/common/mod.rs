//! Shared test harness: random graph generation and brute-force reference
//! implementations of the four expansion strategies.
//!
//! The references are deliberately naive — full sorts and plain queue-based
//! BFS over materialized entity lists — and independent of the library's
//! index-backed implementations they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use geoparse::embed::{cosine_similarity, EmbeddingStore};
use geoparse::expand::Candidate;
use geoparse::features::edit_distance;
use geoparse::kg::{
    EntityId, GeoCoordinate, GeoPredicateConfig, KnowledgeGraph, KnowledgeGraphBuilder,
};

pub struct RandomGraphConfig {
    pub n: usize,
    pub geo_fraction: f64,
    pub edge_prob: f64,
    pub vector_fraction: f64,
    pub unique_labels: bool,
}

impl Default for RandomGraphConfig {
    fn default() -> Self {
        RandomGraphConfig {
            n: 120,
            geo_fraction: 0.4,
            edge_prob: 0.02,
            vector_fraction: 0.8,
            unique_labels: false,
        }
    }
}

pub fn random_graph(
    cfg: &RandomGraphConfig,
    rng: &mut ChaCha12Rng,
) -> (KnowledgeGraph, EmbeddingStore) {
    let mut builder = KnowledgeGraphBuilder::new();
    let alphabet = ['a', 'b', 'c', 'd', 'e', 'f'];
    let mut labels = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let len = rng.gen_range(3..10);
        let mut label: String = (0..len)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect();
        if cfg.unique_labels {
            label.push_str(&i.to_string());
        }
        labels.push(label);
    }
    for (i, label) in labels.iter().enumerate() {
        let iri = format!("t:n{i:03}");
        let entity = builder.add_entity(&iri, label).expect("fresh iri");
        if rng.gen::<f64>() < cfg.geo_fraction {
            let lat = rng.gen_range(-80.0..80.0);
            let lon = rng.gen_range(-179.0..179.0);
            entity.add_literal(
                "http://www.georss.org/georss/point",
                format!("{lat} {lon}"),
            );
        }
    }
    for i in 0..cfg.n {
        for j in (i + 1)..cfg.n {
            if rng.gen::<f64>() < cfg.edge_prob {
                builder
                    .add_link(
                        &format!("t:n{i:03}"),
                        "http://example.org/linked",
                        &format!("t:n{j:03}"),
                    )
                    .expect("entities exist");
            }
        }
    }
    let (kg, _) = builder.build(&GeoPredicateConfig::default());
    let dim = 8;
    let mut store = EmbeddingStore::new(dim);
    for i in 0..cfg.n {
        if rng.gen::<f64>() < cfg.vector_fraction {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in &mut v {
                    *x /= norm;
                }
            }
            store
                .insert(EntityId::new(format!("t:n{i:03}")).unwrap(), v)
                .expect("dimension matches");
        }
    }
    (kg, store)
}

/// Plain queue BFS over the undirected adjacency, up to `max_hops`.
pub fn bf_hops(kg: &KnowledgeGraph, start: &EntityId, max_hops: u32) -> BTreeMap<EntityId, u32> {
    let mut hops = BTreeMap::new();
    hops.insert(start.clone(), 0u32);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(node) = queue.pop_front() {
        let h = hops[&node];
        if h == max_hops {
            continue;
        }
        for n in kg.neighbors(&node) {
            if !hops.contains_key(n) {
                hops.insert(n.clone(), h + 1);
                queue.push_back(n.clone());
            }
        }
    }
    hops
}

fn candidate(
    kg: &KnowledgeGraph,
    hops: &BTreeMap<EntityId, u32>,
    id: &EntityId,
    rank: usize,
    rank_geo: usize,
) -> Candidate {
    Candidate {
        entity: id.clone(),
        coordinate: kg.coordinate(id).expect("geo entity"),
        hop: hops.get(id).copied(),
        expansion_rank: rank,
        expansion_rank_onlygeo: rank_geo,
    }
}

/// Reference spelling expansion: sort every entity by (edit distance to the
/// start's label, id); geographic entities fill the output.
pub fn bf_spelling(
    kg: &KnowledgeGraph,
    start: &EntityId,
    l: usize,
    max_hops: u32,
) -> Vec<Candidate> {
    if l == 0 {
        return Vec::new();
    }
    let target = kg.label(start).expect("start exists");
    let mut all: Vec<(u32, EntityId)> = kg
        .entities()
        .map(|e| (edit_distance(&e.label, target), e.id.clone()))
        .collect();
    all.sort();
    let hops = bf_hops(kg, start, max_hops);
    let mut out = Vec::new();
    let mut geo_seen = 0;
    for (rank, (_, id)) in all.iter().enumerate() {
        if kg.is_geo(id) {
            out.push(candidate(kg, &hops, id, rank, geo_seen));
            geo_seen += 1;
            if out.len() == l {
                break;
            }
        }
    }
    out
}

/// Reference latent expansion: sort entities owning vectors by descending
/// cosine similarity to the start vector (the start itself first), then id.
pub fn bf_latent(
    kg: &KnowledgeGraph,
    store: &EmbeddingStore,
    start: &EntityId,
    l: usize,
    max_hops: u32,
) -> Option<Vec<Candidate>> {
    let start_vec = store.get(start)?;
    if l == 0 {
        return Some(Vec::new());
    }
    let mut all: Vec<(f64, bool, EntityId)> = kg
        .entities()
        .filter_map(|e| {
            let v = store.get(&e.id)?;
            let sim = if e.id == *start {
                1.0
            } else {
                cosine_similarity(start_vec, v)
            };
            Some((sim, e.id != *start, e.id.clone()))
        })
        .collect();
    all.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    let hops = bf_hops(kg, start, max_hops);
    let mut out = Vec::new();
    let mut geo_seen = 0;
    for (rank, (_, _, id)) in all.iter().enumerate() {
        if kg.is_geo(id) {
            out.push(candidate(kg, &hops, id, rank, geo_seen));
            geo_seen += 1;
            if out.len() == l {
                break;
            }
        }
    }
    Some(out)
}

pub enum BfTiebreak {
    Spelling,
    Latent,
}

/// Reference topological expansion: layered BFS; each layer ordered by the
/// tiebreak (vectorless entities last under `Latent`), then id; ranks follow
/// the realized order.
pub fn bf_topological(
    kg: &KnowledgeGraph,
    store: &EmbeddingStore,
    start: &EntityId,
    l: usize,
    tiebreak: BfTiebreak,
    max_hops: u32,
) -> Vec<Candidate> {
    if l == 0 {
        return Vec::new();
    }
    let target = kg.label(start).expect("start exists").to_string();
    let start_vec = store.get(start);
    let mut visited: BTreeSet<EntityId> = BTreeSet::new();
    visited.insert(start.clone());
    let mut layer = vec![start.clone()];
    let mut out = Vec::new();
    let mut rank = 0usize;
    let mut geo_seen = 0usize;
    let mut hop = 0u32;
    loop {
        let mut keyed: Vec<((f64, bool), EntityId)> = layer
            .iter()
            .map(|id| {
                let key = match tiebreak {
                    BfTiebreak::Spelling => {
                        (edit_distance(&target, kg.label(id).unwrap()) as f64, false)
                    }
                    BfTiebreak::Latent => match (start_vec, store.get(id)) {
                        (Some(a), Some(b)) => (-cosine_similarity(a, b), false),
                        _ => (0.0, true),
                    },
                };
                (key, id.clone())
            })
            .collect();
        keyed.sort_by(|a, b| {
            a.0 .1
                .cmp(&b.0 .1)
                .then_with(|| a.0 .0.total_cmp(&b.0 .0))
                .then_with(|| a.1.cmp(&b.1))
        });
        for (_, id) in keyed {
            if kg.is_geo(&id) {
                out.push(Candidate {
                    entity: id.clone(),
                    coordinate: kg.coordinate(&id).unwrap(),
                    hop: Some(hop),
                    expansion_rank: rank,
                    expansion_rank_onlygeo: geo_seen,
                });
                geo_seen += 1;
            }
            rank += 1;
            if out.len() == l {
                return out;
            }
        }
        if hop == max_hops {
            return out;
        }
        let mut next = BTreeSet::new();
        for id in &layer {
            for n in kg.neighbors(id) {
                if !visited.contains(n) {
                    next.insert(n.clone());
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        visited.extend(next.iter().cloned());
        layer = next.into_iter().collect();
        hop += 1;
    }
}

/// Coordinate a given number of kilometres due north of `(0, 0)`-relative
/// latitude `base_lat` (longitude 0). Exact for the haversine sphere.
pub fn north_of(base_lat: f64, km: f64) -> GeoCoordinate {
    let km_per_deg = std::f64::consts::PI * 6371.0088 / 180.0;
    GeoCoordinate::new(base_lat + km / km_per_deg, 0.0).expect("within range")
}
