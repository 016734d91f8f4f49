//! Immutable knowledge-graph store.
//!
//! A graph is loaded once from a line-oriented snapshot (see [`load`]) or
//! assembled through [`KnowledgeGraphBuilder`], after which it is read-only:
//! every query below takes `&self` and the structure is safe to share across
//! threads.

mod geo;
pub mod load;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use geo::{
    parse_geo_coordinates, GeoCoordinate, GeoFormat, GeoPredicate, GeoPredicateConfig,
    DEFAULT_GEO_PREDICATES,
};
pub use load::{load_knowledge_graph, LoadStats};

/// Absolute IRI identifying one entity. The derived `Ord` gives the total
/// lexicographic order used for deterministic tie-breaking everywhere.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(iri: impl Into<String>) -> Result<Self> {
        let iri = iri.into();
        if iri.is_empty() {
            return Err(Error::invalid("entity IRI must be non-empty"));
        }
        Ok(EntityId(iri))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Object of a predicate: either a link to another resource or a literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredicateValue {
    Iri(String),
    Literal(String),
}

#[derive(Debug, Clone)]
pub struct Entity {
    pub id: EntityId,
    pub label: String,
    pub predicates: BTreeMap<String, Vec<PredicateValue>>,
    pub classes: BTreeSet<String>,
    pub short_abstract: Option<String>,
    pub long_abstract: Option<String>,
    pub page_length: Option<u64>,
    pub same_as: BTreeSet<EntityId>,
}

impl Entity {
    pub fn new(id: EntityId, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::invalid(format!("entity `{id}` has an empty label")));
        }
        Ok(Entity {
            id,
            label,
            predicates: BTreeMap::new(),
            classes: BTreeSet::new(),
            short_abstract: None,
            long_abstract: None,
            page_length: None,
            same_as: BTreeSet::new(),
        })
    }

    pub fn add_literal(&mut self, predicate: impl Into<String>, value: impl Into<String>) {
        self.predicates
            .entry(predicate.into())
            .or_default()
            .push(PredicateValue::Literal(value.into()));
    }

    pub fn add_object(&mut self, predicate: impl Into<String>, target: impl Into<String>) {
        self.predicates
            .entry(predicate.into())
            .or_default()
            .push(PredicateValue::Iri(target.into()));
    }
}

/// Spatial specificity of an entity, most specific first.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    Poi,
    City,
    RegionOrCounty,
    Country,
    Unknown,
}

impl Granularity {
    pub const LEVELS: [Granularity; 4] = [
        Granularity::Poi,
        Granularity::City,
        Granularity::RegionOrCounty,
        Granularity::Country,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Granularity::Poi => "poi",
            Granularity::City => "city",
            Granularity::RegionOrCounty => "region-or-county",
            Granularity::Country => "country",
            Granularity::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Granularity> {
        match s {
            "poi" => Some(Granularity::Poi),
            "city" => Some(Granularity::City),
            "region-or-county" | "region" => Some(Granularity::RegionOrCounty),
            "country" => Some(Granularity::Country),
            "unknown" => Some(Granularity::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ontology-class → granularity-level mapping, loaded from configuration.
#[derive(Debug, Clone)]
pub struct OntologyMap {
    classes: BTreeMap<String, Granularity>,
}

pub const DEFAULT_ONTOLOGY_MAP: &str = include_str!("default_ontology_map.txt");

impl OntologyMap {
    /// `class-iri<TAB>level` per line; levels `poi`, `city`,
    /// `region-or-county`, `country`. `#` starts a comment.
    pub fn parse(src: &str, file: &str) -> Result<Self> {
        let mut classes = BTreeMap::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (iri, level) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(file, idx + 1, "expected `class-iri<TAB>level`"))?;
            let level = Granularity::parse(level.trim())
                .ok_or_else(|| Error::parse(file, idx + 1, format!("unknown level `{level}`")))?;
            classes.insert(iri.trim().to_string(), level);
        }
        Ok(OntologyMap { classes })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src, &path.display().to_string())
    }

    pub fn level_of(&self, class_iri: &str) -> Option<Granularity> {
        self.classes.get(class_iri).copied()
    }
}

impl Default for OntologyMap {
    fn default() -> Self {
        Self::parse(DEFAULT_ONTOLOGY_MAP, "<default ontology map>")
            .expect("built-in ontology map parses")
    }
}

/// Most specific granularity level matched by the entity's ontology classes
/// (POI is most specific, Country least); `Unknown` when nothing matches.
/// Total function: never fails.
pub fn granularity_of(entity: &Entity, map: &OntologyMap) -> Granularity {
    let mut best: Option<Granularity> = None;
    for class in &entity.classes {
        if let Some(level) = map.level_of(class) {
            best = Some(match best {
                Some(b) if b <= level => b,
                _ => level,
            });
        }
    }
    best.unwrap_or(Granularity::Unknown)
}

/// Immutable entity store with symmetrized adjacency, coordinate index and
/// degree statistics.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, Entity>,
    adjacency: BTreeMap<EntityId, BTreeSet<EntityId>>,
    geo_index: BTreeMap<EntityId, GeoCoordinate>,
    degree: BTreeMap<EntityId, u32>,
}

impl KnowledgeGraph {
    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn label(&self, id: &EntityId) -> Option<&str> {
        self.entities.get(id).map(|e| e.label.as_str())
    }

    pub fn coordinate(&self, id: &EntityId) -> Option<GeoCoordinate> {
        self.geo_index.get(id).copied()
    }

    pub fn is_geo(&self, id: &EntityId) -> bool {
        self.geo_index.contains_key(id)
    }

    pub fn neighbors(&self, id: &EntityId) -> impl Iterator<Item = &EntityId> + '_ {
        self.adjacency.get(id).into_iter().flatten()
    }

    pub fn degree(&self, id: &EntityId) -> u32 {
        self.degree.get(id).copied().unwrap_or(0)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> + '_ {
        self.entities.values()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &EntityId> + '_ {
        self.entities.keys()
    }

    pub fn geo_entities(&self) -> impl Iterator<Item = (&EntityId, &GeoCoordinate)> + '_ {
        self.geo_index.iter()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn geo_len(&self) -> usize {
        self.geo_index.len()
    }

    /// Breadth-first closure over `sameAs` links, up to `max_depth` link
    /// hops from `start`. The start itself is excluded. Order is BFS layer
    /// first, then `EntityId` order within a layer; cycles terminate via a
    /// visited set. Targets that are not loaded entities still appear in the
    /// closure (they simply have no onward links).
    pub fn same_as_closure(&self, start: &EntityId, max_depth: u32) -> Result<Vec<EntityId>> {
        if !self.contains(start) {
            return Err(Error::UnknownEntity(start.as_str().to_string()));
        }
        let mut visited: BTreeSet<EntityId> = BTreeSet::new();
        visited.insert(start.clone());
        let mut out = Vec::new();
        let mut frontier: VecDeque<EntityId> = VecDeque::new();
        frontier.push_back(start.clone());
        for _ in 0..max_depth {
            let mut layer: BTreeSet<EntityId> = BTreeSet::new();
            for node in frontier.drain(..) {
                if let Some(entity) = self.entities.get(&node) {
                    for target in &entity.same_as {
                        if !visited.contains(target) {
                            layer.insert(target.clone());
                        }
                    }
                }
            }
            if layer.is_empty() {
                break;
            }
            for id in &layer {
                visited.insert(id.clone());
                out.push(id.clone());
            }
            frontier.extend(layer);
        }
        Ok(out)
    }

    /// Hex SHA-256 of the canonical record stream. Identical graph content
    /// yields an identical checksum regardless of how the graph was built;
    /// expansion caches use it to detect stale or mismatched snapshots.
    pub fn content_checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for entity in self.entities.values() {
            hasher.update(b"E\x1f");
            hasher.update(entity.id.as_str());
            hasher.update(b"\x1f");
            hasher.update(&entity.label);
            for (pred, values) in &entity.predicates {
                for v in values {
                    let (tag, val): (&[u8], &str) = match v {
                        PredicateValue::Iri(s) => (b"P@", s),
                        PredicateValue::Literal(s) => (b"P:", s),
                    };
                    hasher.update(tag);
                    hasher.update(pred);
                    hasher.update(b"\x1f");
                    hasher.update(val);
                }
            }
            for class in &entity.classes {
                hasher.update(b"C\x1f");
                hasher.update(class);
            }
            for s in &entity.same_as {
                hasher.update(b"S\x1f");
                hasher.update(s.as_str());
            }
            if let Some(a) = &entity.short_abstract {
                hasher.update(b"As\x1f");
                hasher.update(a);
            }
            if let Some(a) = &entity.long_abstract {
                hasher.update(b"Al\x1f");
                hasher.update(a);
            }
            if let Some(n) = entity.page_length {
                hasher.update(b"L\x1f");
                hasher.update(n.to_le_bytes());
            }
            hasher.update(b"\x1e");
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{byte:02x}").expect("write to string");
        }
        hex
    }
}

/// Accumulates entities and object links, then derives the adjacency view,
/// degree statistics and coordinate index in [`KnowledgeGraphBuilder::build`].
#[derive(Debug, Default)]
pub struct KnowledgeGraphBuilder {
    entities: BTreeMap<EntityId, Entity>,
}

impl KnowledgeGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_entity(&mut self, iri: &str, label: &str) -> Result<&mut Entity> {
        let id = EntityId::new(iri)?;
        if self.entities.contains_key(&id) {
            return Err(Error::invalid(format!("duplicate entity id `{iri}`")));
        }
        let entity = Entity::new(id.clone(), label)?;
        Ok(self.entities.entry(id).or_insert(entity))
    }

    pub fn entity_mut(&mut self, iri: &str) -> Option<&mut Entity> {
        let id = EntityId::new(iri).ok()?;
        self.entities.get_mut(&id)
    }

    pub fn contains(&self, iri: &str) -> bool {
        EntityId::new(iri)
            .map(|id| self.entities.contains_key(&id))
            .unwrap_or(false)
    }

    /// Adds an object-property triple `subject --predicate--> target`.
    pub fn add_link(&mut self, subject: &str, predicate: &str, target: &str) -> Result<()> {
        let entity = self
            .entity_mut(subject)
            .ok_or_else(|| Error::UnknownEntity(subject.to_string()))?;
        entity.add_object(predicate, target);
        Ok(())
    }

    /// Finalizes the store. Adjacency is the undirected view of all object
    /// links whose target is itself a loaded entity (self-loops ignored);
    /// `degree` is the distinct-neighbor count of that view. Returns the
    /// number of entities whose coordinate candidates included an
    /// out-of-range value.
    pub fn build(self, geo_config: &GeoPredicateConfig) -> (KnowledgeGraph, u32) {
        let entities = self.entities;
        let mut adjacency: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
        for entity in entities.values() {
            for values in entity.predicates.values() {
                for value in values {
                    if let PredicateValue::Iri(target) = value {
                        let target_id = match EntityId::new(target.clone()) {
                            Ok(id) => id,
                            Err(_) => continue,
                        };
                        if target_id != entity.id && entities.contains_key(&target_id) {
                            adjacency
                                .entry(entity.id.clone())
                                .or_default()
                                .insert(target_id.clone());
                            adjacency
                                .entry(target_id)
                                .or_default()
                                .insert(entity.id.clone());
                        }
                    }
                }
            }
        }
        let mut geo_index = BTreeMap::new();
        let mut warnings = 0u32;
        for entity in entities.values() {
            let outcome = geo::parse_geo_detailed(entity, geo_config);
            if outcome.range_violation {
                warnings += 1;
            }
            if let Some(c) = outcome.coordinate {
                geo_index.insert(entity.id.clone(), c);
            }
        }
        let degree = entities
            .keys()
            .map(|id| {
                let d = adjacency.get(id).map(|s| s.len()).unwrap_or(0) as u32;
                (id.clone(), d)
            })
            .collect();
        (
            KnowledgeGraph {
                entities,
                adjacency,
                geo_index,
                degree,
            },
            warnings,
        )
    }
}
