//! Knowledge-graph snapshot loader.
//!
//! The snapshot is a line-oriented UTF-8 file of tab-separated records:
//!
//! ```text
//! E<TAB>iri<TAB>label                      declare an entity
//! P<TAB>iri<TAB>predicate<TAB>value        predicate; value `@iri` links a resource
//! C<TAB>iri<TAB>class-iri                  ontology class
//! S<TAB>iri<TAB>equivalent-iri             sameAs link
//! A<TAB>iri<TAB>short|long<TAB>text        abstract (last record wins)
//! L<TAB>iri<TAB>page-length                Wikipedia source length, characters
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. An entity must be
//! declared before any record references it; duplicate declarations are
//! rejected.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::{EntityId, GeoPredicateConfig, KnowledgeGraph, KnowledgeGraphBuilder};

/// Side information from a load.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadStats {
    /// Entities whose geo predicates contained an out-of-range value.
    pub geo_range_warnings: u32,
    /// Records parsed (excluding blanks and comments).
    pub records: u64,
}

pub fn load_knowledge_graph(
    path: &Path,
    geo_config: &GeoPredicateConfig,
) -> Result<(KnowledgeGraph, LoadStats)> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_knowledge_graph(&src, &path.display().to_string(), geo_config)
}

pub fn parse_knowledge_graph(
    src: &str,
    file: &str,
    geo_config: &GeoPredicateConfig,
) -> Result<(KnowledgeGraph, LoadStats)> {
    let mut builder = KnowledgeGraphBuilder::new();
    let mut records = 0u64;
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        records += 1;
        let mut fields = raw.split('\t');
        let kind = fields.next().unwrap_or("");
        let err = |msg: String| Error::parse(file, line_no, msg);
        match kind {
            "E" => {
                let iri = fields.next().ok_or_else(|| err("E record missing iri".into()))?;
                let label = fields.next().ok_or_else(|| err("E record missing label".into()))?;
                if builder.contains(iri) {
                    return Err(err(format!("duplicate entity id `{iri}`")));
                }
                builder
                    .add_entity(iri, label)
                    .map_err(|e| err(e.to_string()))?;
            }
            "P" => {
                let iri = fields.next().ok_or_else(|| err("P record missing iri".into()))?;
                let predicate = fields
                    .next()
                    .ok_or_else(|| err("P record missing predicate".into()))?
                    .to_string();
                // The value is the remainder of the line, tabs included.
                let value = rest_of(raw, 3).ok_or_else(|| err("P record missing value".into()))?;
                let entity = builder
                    .entity_mut(iri)
                    .ok_or_else(|| err(format!("P record references unknown entity `{iri}`")))?;
                match value.strip_prefix('@') {
                    Some(target) if !target.is_empty() => entity.add_object(predicate, target),
                    Some(_) => return Err(err("P record has empty IRI object".into())),
                    None => entity.add_literal(predicate, value),
                }
            }
            "C" => {
                let iri = fields.next().ok_or_else(|| err("C record missing iri".into()))?;
                let class = fields
                    .next()
                    .ok_or_else(|| err("C record missing class iri".into()))?;
                let entity = builder
                    .entity_mut(iri)
                    .ok_or_else(|| err(format!("C record references unknown entity `{iri}`")))?;
                entity.classes.insert(class.to_string());
            }
            "S" => {
                let iri = fields.next().ok_or_else(|| err("S record missing iri".into()))?;
                let target = fields
                    .next()
                    .ok_or_else(|| err("S record missing equivalent iri".into()))?;
                let target = EntityId::new(target).map_err(|e| err(e.to_string()))?;
                let entity = builder
                    .entity_mut(iri)
                    .ok_or_else(|| err(format!("S record references unknown entity `{iri}`")))?;
                entity.same_as.insert(target);
            }
            "A" => {
                let iri = fields.next().ok_or_else(|| err("A record missing iri".into()))?;
                let kind = fields
                    .next()
                    .ok_or_else(|| err("A record missing short|long".into()))?;
                let text = rest_of(raw, 3).ok_or_else(|| err("A record missing text".into()))?;
                let entity = builder
                    .entity_mut(iri)
                    .ok_or_else(|| err(format!("A record references unknown entity `{iri}`")))?;
                match kind {
                    "short" => entity.short_abstract = Some(text.to_string()),
                    "long" => entity.long_abstract = Some(text.to_string()),
                    other => return Err(err(format!("abstract kind must be short|long, got `{other}`"))),
                }
            }
            "L" => {
                let iri = fields.next().ok_or_else(|| err("L record missing iri".into()))?;
                let n = fields
                    .next()
                    .ok_or_else(|| err("L record missing page length".into()))?;
                let n: u64 = n
                    .parse()
                    .map_err(|_| err(format!("page length `{n}` is not a non-negative integer")))?;
                let entity = builder
                    .entity_mut(iri)
                    .ok_or_else(|| err(format!("L record references unknown entity `{iri}`")))?;
                entity.page_length = Some(n);
            }
            other => {
                return Err(err(format!(
                    "unknown record type `{other}` (expected E, P, C, S, A or L)"
                )))
            }
        }
    }
    let (graph, geo_range_warnings) = builder.build(geo_config);
    Ok((
        graph,
        LoadStats {
            geo_range_warnings,
            records,
        },
    ))
}

/// The line's content from the `n`-th tab-separated field onwards,
/// preserving any further tabs.
fn rest_of(line: &str, n: usize) -> Option<&str> {
    let mut offset = 0;
    for _ in 0..n {
        let tab = line[offset..].find('\t')?;
        offset += tab + 1;
    }
    Some(&line[offset..])
}
