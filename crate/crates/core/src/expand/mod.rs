//! Candidate expansion: from a starting entity to an ordered vector of
//! geographic candidates.
//!
//! Four strategies are provided. `spelling` ranks geographic entities by
//! case-sensitive edit distance between labels; `latent-semantic` ranks by
//! cosine similarity of node embeddings; the two `topological-*` strategies
//! run a breadth-first search over the undirected adjacency and order each
//! hop layer by one of the former criteria. Every strategy returns only
//! entities that carry geographic coordinates, never more than `L` of them,
//! deterministically (final ties always fall back to `EntityId` order).
//!
//! Expansions depend only on the starting node, so they can be precomputed
//! for the whole graph and cached on disk.

pub mod bktree;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::{Annotation, Document};
use crate::embed::{cosine_similarity, EmbeddingStore};
use crate::error::{Error, Result};
use crate::features::edit_distance;
use crate::kg::{EntityId, GeoCoordinate, KnowledgeGraph};
use crate::pipeline::geo_distance;

use bktree::{BkEntry, BkTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Spelling,
    LatentSemantic,
    TopologicalSpe,
    TopologicalLat,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Spelling,
        Strategy::LatentSemantic,
        Strategy::TopologicalSpe,
        Strategy::TopologicalLat,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Spelling => "spelling",
            Strategy::LatentSemantic => "latent-semantic",
            Strategy::TopologicalSpe => "topological-spe",
            Strategy::TopologicalLat => "topological-lat",
        }
    }

    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "spelling" => Some(Strategy::Spelling),
            "latent-semantic" => Some(Strategy::LatentSemantic),
            "topological-spe" => Some(Strategy::TopologicalSpe),
            "topological-lat" => Some(Strategy::TopologicalLat),
            _ => None,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Within-layer ordering criterion for topological expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tiebreak {
    Spelling,
    Latent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionConfig {
    pub strategy: Strategy,
    pub size_l: usize,
    pub max_hops: u32,
}

impl ExpansionConfig {
    pub fn new(strategy: Strategy, size_l: usize, max_hops: u32) -> Result<Self> {
        if max_hops == 0 {
            return Err(Error::invalid("max_hops must be at least 1"));
        }
        Ok(ExpansionConfig {
            strategy,
            size_l,
            max_hops,
        })
    }
}

/// A geographic entity reached by an expansion strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub entity: EntityId,
    pub coordinate: GeoCoordinate,
    /// Shortest-path distance from the starting node over the undirected
    /// adjacency; `None` when farther than the configured hop cutoff (or
    /// disconnected).
    pub hop: Option<u32>,
    /// Entities of any kind traversed by the strategy before this one.
    pub expansion_rank: usize,
    /// Geographic entities traversed before this one.
    pub expansion_rank_onlygeo: usize,
}

/// Label index over all entities; geographic entries are flagged so queries
/// can rank the full traversal while returning only geographic candidates.
pub struct SpellingIndex {
    tree: BkTree,
    geo_count: usize,
    max_label_chars: usize,
}

impl SpellingIndex {
    pub fn build(kg: &KnowledgeGraph) -> Self {
        let mut tree = BkTree::new();
        let mut geo_count = 0;
        let mut max_label_chars = 0;
        for entity in kg.entities() {
            let geo = kg.is_geo(&entity.id);
            geo_count += geo as usize;
            max_label_chars = max_label_chars.max(entity.label.chars().count());
            tree.insert(BkEntry {
                id: entity.id.clone(),
                label: entity.label.clone(),
                geo,
            });
        }
        SpellingIndex {
            tree,
            geo_count,
            max_label_chars,
        }
    }

    /// All entities sorted by `(edit distance to target, EntityId)`,
    /// truncated to the shortest prefix containing `geo_needed` geographic
    /// entries (or everything when fewer exist).
    fn ranked_prefix(&self, target: &str, geo_needed: usize) -> Vec<(u32, EntityId, bool)> {
        let needed = geo_needed.min(self.geo_count);
        let max_radius = (self.max_label_chars.max(target.chars().count())) as u32;
        let mut radius = 0u32;
        let mut hits;
        loop {
            hits = self.tree.within(target, radius);
            let geo_found = hits.iter().filter(|(_, e)| e.geo).count();
            if geo_found >= needed || radius >= max_radius {
                break;
            }
            radius = (radius * 2).max(radius + 1);
        }
        let mut ranked: Vec<(u32, EntityId, bool)> = hits
            .into_iter()
            .map(|(d, e)| (d, e.id.clone(), e.geo))
            .collect();
        ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        ranked
    }
}

/// Shortest-path hop counts from `start`, up to and including `max_hops`.
fn bfs_hops(kg: &KnowledgeGraph, start: &EntityId, max_hops: u32) -> BTreeMap<EntityId, u32> {
    let mut hops = BTreeMap::new();
    hops.insert(start.clone(), 0);
    let mut frontier = VecDeque::from([start.clone()]);
    while let Some(node) = frontier.pop_front() {
        let h = hops[&node];
        if h == max_hops {
            continue;
        }
        for n in kg.neighbors(&node) {
            if !hops.contains_key(n) {
                hops.insert(n.clone(), h + 1);
                frontier.push_back(n.clone());
            }
        }
    }
    hops
}

/// Geographic entities sorted ascending by case-sensitive edit distance
/// between their label and the starting node's label, ties by `EntityId`.
/// Non-geographic entities are never returned but do count towards
/// `expansion_rank`.
pub fn expand_spelling(
    kg: &KnowledgeGraph,
    index: &SpellingIndex,
    start: &EntityId,
    l: usize,
    max_hops: u32,
) -> Result<Vec<Candidate>> {
    let start_entity = kg
        .entity(start)
        .ok_or_else(|| Error::UnknownEntity(start.as_str().to_string()))?;
    if l == 0 {
        return Ok(Vec::new());
    }
    let ranked = index.ranked_prefix(&start_entity.label, l);
    let hops = bfs_hops(kg, start, max_hops);
    let mut out = Vec::new();
    let mut geo_seen = 0usize;
    for (rank, (_, id, geo)) in ranked.iter().enumerate() {
        if !geo {
            continue;
        }
        out.push(Candidate {
            entity: id.clone(),
            coordinate: kg.coordinate(id).expect("geo entries have coordinates"),
            hop: hops.get(id).copied(),
            expansion_rank: rank,
            expansion_rank_onlygeo: geo_seen,
        });
        geo_seen += 1;
        if out.len() == l {
            break;
        }
    }
    Ok(out)
}

/// Geographic entities that own an embedding vector, sorted descending by
/// cosine similarity to the starting node's vector. The starting node, when
/// geographic, ranks first on its self-similarity; entities without vectors
/// are skipped entirely. Errors distinguish an unknown entity from a known
/// entity that lacks a vector.
pub fn expand_latent(
    kg: &KnowledgeGraph,
    embeddings: &EmbeddingStore,
    start: &EntityId,
    l: usize,
    max_hops: u32,
) -> Result<Vec<Candidate>> {
    if !kg.contains(start) {
        return Err(Error::UnknownEntity(start.as_str().to_string()));
    }
    let start_vec = embeddings
        .get(start)
        .ok_or_else(|| Error::MissingVector(start.as_str().to_string()))?;
    if l == 0 {
        return Ok(Vec::new());
    }
    let mut ranked: Vec<(f64, bool, &EntityId)> = Vec::new();
    for id in embeddings.ids() {
        if !kg.contains(id) {
            continue;
        }
        let sim = if id == start {
            1.0
        } else {
            cosine_similarity(start_vec, embeddings.get(id).expect("id from store"))
        };
        ranked.push((sim, id != start, id));
    }
    ranked.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(b.2))
    });
    let hops = bfs_hops(kg, start, max_hops);
    let mut out = Vec::new();
    let mut geo_seen = 0usize;
    for (rank, (_, _, id)) in ranked.iter().enumerate() {
        if !kg.is_geo(id) {
            continue;
        }
        out.push(Candidate {
            entity: (*id).clone(),
            coordinate: kg.coordinate(id).expect("geo index has coordinate"),
            hop: hops.get(*id).copied(),
            expansion_rank: rank,
            expansion_rank_onlygeo: geo_seen,
        });
        geo_seen += 1;
        if out.len() == l {
            break;
        }
    }
    Ok(out)
}

/// Breadth-first expansion: geographic entities are collected layer by
/// layer (the starting node itself is the hop-0 layer) until `L` are found
/// or `max_hops` is exhausted. Within one layer, entities are ordered by the
/// tiebreak criterion — ascending edit distance to the starting label, or
/// descending cosine similarity with vectorless entities last — and then by
/// `EntityId`. Ranks follow this realized traversal order.
pub fn expand_topological(
    kg: &KnowledgeGraph,
    embeddings: Option<&EmbeddingStore>,
    start: &EntityId,
    l: usize,
    tiebreak: Tiebreak,
    max_hops: u32,
) -> Result<Vec<Candidate>> {
    let start_entity = kg
        .entity(start)
        .ok_or_else(|| Error::UnknownEntity(start.as_str().to_string()))?;
    if l == 0 {
        return Ok(Vec::new());
    }
    let start_vec = embeddings.and_then(|e| e.get(start));
    let layer_key = |id: &EntityId| -> (f64, bool) {
        // Returns (sort value, missing) with ascending order semantics.
        match tiebreak {
            Tiebreak::Spelling => {
                let label = kg.label(id).expect("layer members are loaded entities");
                (edit_distance(&start_entity.label, label) as f64, false)
            }
            Tiebreak::Latent => match (start_vec, embeddings.and_then(|e| e.get(id))) {
                (Some(a), Some(b)) => (-cosine_similarity(a, b), false),
                _ => (0.0, true),
            },
        }
    };

    let mut visited: BTreeSet<EntityId> = BTreeSet::new();
    visited.insert(start.clone());
    let mut layer: Vec<EntityId> = vec![start.clone()];
    let mut out = Vec::new();
    let mut traversed = 0usize;
    let mut geo_seen = 0usize;
    let mut hop = 0u32;
    while !layer.is_empty() {
        let mut ordered: Vec<(f64, bool, EntityId)> = layer
            .iter()
            .map(|id| {
                let (v, missing) = layer_key(id);
                (v, missing, id.clone())
            })
            .collect();
        ordered.sort_by(|a, b| {
            a.1.cmp(&b.1)
                .then_with(|| a.0.total_cmp(&b.0))
                .then_with(|| a.2.cmp(&b.2))
        });
        for (_, _, id) in &ordered {
            if kg.is_geo(id) {
                out.push(Candidate {
                    entity: id.clone(),
                    coordinate: kg.coordinate(id).expect("geo index has coordinate"),
                    hop: Some(hop),
                    expansion_rank: traversed,
                    expansion_rank_onlygeo: geo_seen,
                });
                geo_seen += 1;
            }
            traversed += 1;
            if out.len() == l {
                return Ok(out);
            }
        }
        if hop == max_hops {
            break;
        }
        let mut next: BTreeSet<EntityId> = BTreeSet::new();
        for id in &layer {
            for n in kg.neighbors(id) {
                if !visited.contains(n) {
                    next.insert(n.clone());
                }
            }
        }
        visited.extend(next.iter().cloned());
        layer = next.into_iter().collect();
        hop += 1;
    }
    Ok(out)
}

/// Runs the configured strategy for one starting entity.
pub fn expand(
    kg: &KnowledgeGraph,
    index: &SpellingIndex,
    embeddings: Option<&EmbeddingStore>,
    config: &ExpansionConfig,
    start: &EntityId,
) -> Result<Vec<Candidate>> {
    match config.strategy {
        Strategy::Spelling => expand_spelling(kg, index, start, config.size_l, config.max_hops),
        Strategy::LatentSemantic => {
            let store = embeddings
                .ok_or_else(|| Error::invalid("latent-semantic expansion needs an embedding store"))?;
            expand_latent(kg, store, start, config.size_l, config.max_hops)
        }
        Strategy::TopologicalSpe => expand_topological(
            kg,
            embeddings,
            start,
            config.size_l,
            Tiebreak::Spelling,
            config.max_hops,
        ),
        Strategy::TopologicalLat => expand_topological(
            kg,
            embeddings,
            start,
            config.size_l,
            Tiebreak::Latent,
            config.max_hops,
        ),
    }
}

/// Precomputed per-entity expansions for one (strategy, L, max_hops)
/// configuration, tied to a knowledge-graph checksum.
#[derive(Debug, Clone)]
pub struct ExpansionTable {
    pub config: ExpansionConfig,
    pub kg_checksum: String,
    entries: BTreeMap<EntityId, Vec<Candidate>>,
}

impl ExpansionTable {
    pub fn get(&self, id: &EntityId) -> Option<&[Candidate]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// The first `l` candidates for `id`; valid for any `l ≤ config.size_l`
    /// because expansions of a smaller size are prefixes of larger ones.
    pub fn prefix(&self, id: &EntityId, l: usize) -> &[Candidate] {
        let full = self.entries.get(id).map(Vec::as_slice).unwrap_or(&[]);
        &full[..l.min(full.len())]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&EntityId, &[Candidate])> + '_ {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn matches_graph(&self, kg: &KnowledgeGraph) -> bool {
        self.kg_checksum == kg.content_checksum()
    }
}

/// Expands every entity of the graph with the configured strategy. Entities
/// the strategy cannot start from (latent expansion without a vector) are
/// omitted from the table. Work is parallelized per entity; the merged
/// result is deterministic.
pub fn precompute_expansions(
    kg: &KnowledgeGraph,
    config: &ExpansionConfig,
    embeddings: Option<&EmbeddingStore>,
) -> Result<ExpansionTable> {
    if config.strategy == Strategy::LatentSemantic && embeddings.is_none() {
        return Err(Error::invalid(
            "latent-semantic expansion needs an embedding store",
        ));
    }
    let index = SpellingIndex::build(kg);
    let ids: Vec<&EntityId> = kg.entity_ids().collect();
    let computed: Vec<(EntityId, Option<Vec<Candidate>>)> = ids
        .par_iter()
        .map(|id| {
            let result = match expand(kg, &index, embeddings, config, id) {
                Ok(candidates) => Some(candidates),
                Err(Error::MissingVector(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(((*id).clone(), result))
        })
        .collect::<Result<_>>()?;
    let mut entries = BTreeMap::new();
    for (id, candidates) in computed {
        if let Some(c) = candidates {
            entries.insert(id, c);
        }
    }
    Ok(ExpansionTable {
        config: *config,
        kg_checksum: kg.content_checksum(),
        entries,
    })
}

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    strategy: Strategy,
    size_l: usize,
    max_hops: u32,
    kg_checksum: String,
    entries: usize,
}

const CACHE_MAGIC: &str = "#geoparse expansion cache v1";

/// Writes the table in the line-oriented cache format: a magic line, a JSON
/// header, then one line per entity (`iri`, then one tab-separated
/// `iri hop rank rankgeo lat lon` group per candidate; hop `-` means
/// beyond the cutoff).
pub fn save_expansion_table(table: &ExpansionTable, path: &Path) -> Result<()> {
    let header = CacheHeader {
        strategy: table.config.strategy,
        size_l: table.config.size_l,
        max_hops: table.config.max_hops,
        kg_checksum: table.kg_checksum.clone(),
        entries: table.entries.len(),
    };
    let mut out = String::new();
    out.push_str(CACHE_MAGIC);
    out.push('\n');
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for (id, candidates) in &table.entries {
        out.push_str(id.as_str());
        for c in candidates {
            let hop = match c.hop {
                Some(h) => h.to_string(),
                None => "-".to_string(),
            };
            out.push('\t');
            out.push_str(&format!(
                "{} {} {} {} {} {}",
                c.entity.as_str(),
                hop,
                c.expansion_rank,
                c.expansion_rank_onlygeo,
                c.coordinate.lat(),
                c.coordinate.lon()
            ));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_expansion_table(path: &Path) -> Result<ExpansionTable> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let mut lines = src.lines().enumerate();
    let magic = lines.next().map(|(_, l)| l).unwrap_or("");
    if magic != CACHE_MAGIC {
        return Err(Error::parse(&file, 1, "not an expansion cache file"));
    }
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::parse(&file, 2, "missing header"))?;
    let header: CacheHeader = serde_json::from_str(header_line)
        .map_err(|e| Error::parse(&file, 2, format!("bad header: {e}")))?;
    let mut entries = BTreeMap::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let mut fields = raw.split('\t');
        let iri = fields.next().expect("split yields at least one field");
        let id = EntityId::new(iri).map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
        let mut candidates = Vec::new();
        for group in fields {
            let parts: Vec<&str> = group.split(' ').collect();
            if parts.len() != 6 {
                return Err(Error::parse(&file, line_no, "candidate group needs 6 fields"));
            }
            let hop = match parts[1] {
                "-" => None,
                h => Some(h.parse::<u32>().map_err(|e| {
                    Error::parse(&file, line_no, format!("bad hop `{h}`: {e}"))
                })?),
            };
            let parse_f = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(&file, line_no, format!("bad number `{s}`: {e}")))
            };
            let parse_u = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|e| Error::parse(&file, line_no, format!("bad rank `{s}`: {e}")))
            };
            let coordinate = GeoCoordinate::new(parse_f(parts[4])?, parse_f(parts[5])?)
                .map_err(|e| Error::parse(&file, line_no, e.to_string()))?;
            candidates.push(Candidate {
                entity: EntityId::new(parts[0])
                    .map_err(|e| Error::parse(&file, line_no, e.to_string()))?,
                coordinate,
                hop,
                expansion_rank: parse_u(parts[2])?,
                expansion_rank_onlygeo: parse_u(parts[3])?,
            });
        }
        entries.insert(id, candidates);
    }
    if entries.len() != header.entries {
        return Err(Error::parse(
            &file,
            2,
            format!(
                "cache is truncated: header declares {} entries, file holds {}",
                header.entries,
                entries.len()
            ),
        ));
    }
    Ok(ExpansionTable {
        config: ExpansionConfig {
            strategy: header.strategy,
            size_l: header.size_l,
            max_hops: header.max_hops,
        },
        kg_checksum: header.kg_checksum,
        entries,
    })
}

/// Fraction of ground-truth locations that would be matched if the
/// selection step always picked the best retrieved candidate: a truth
/// counts as covered when any of the first `l` candidates of any of its
/// document's annotations lies within `threshold_km`. `l = 0` is the
/// no-expansion baseline, where only starting entities that directly carry
/// coordinates are considered. Returns 0 when the dataset has no truths.
pub fn max_theoretical_recall(
    kg: &KnowledgeGraph,
    table: &ExpansionTable,
    docs: &[Document],
    annotations: &[Annotation],
    l: usize,
    threshold_km: f64,
) -> f64 {
    let mut by_doc: BTreeMap<&str, Vec<&Annotation>> = BTreeMap::new();
    for a in annotations {
        by_doc.entry(a.document_id.as_str()).or_default().push(a);
    }
    let mut total = 0usize;
    let mut covered = 0usize;
    for doc in docs {
        let anns = by_doc.get(doc.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        for truth in &doc.ground_truth {
            total += 1;
            let hit = anns.iter().any(|a| {
                if l == 0 {
                    kg.coordinate(&a.start_entity)
                        .map(|c| geo_distance(c, truth.coordinate) < threshold_km)
                        .unwrap_or(false)
                } else {
                    table
                        .prefix(&a.start_entity, l)
                        .iter()
                        .any(|c| geo_distance(c.coordinate, truth.coordinate) < threshold_km)
                }
            });
            covered += hit as usize;
        }
    }
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

/// Jaccard distance `1 − |a∩b| / |a∪b|`; 0 when both sets are empty.
pub fn jaccard_distance(a: &BTreeSet<EntityId>, b: &BTreeSet<EntityId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    let intersection = a.intersection(b).count();
    1.0 - intersection as f64 / union as f64
}
