//! Geographic coordinates and the predicate-driven parser that extracts
//! them from entity records.
//!
//! Linked-data sources store coordinates under many different predicates and
//! in several textual formats (decimal degree pairs, `georss:point`-style
//! literals, degree/minute/second/hemisphere quadruples). The parser walks a
//! configured priority list of predicates and returns the first complete,
//! in-range coordinate.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Entity, PredicateValue};

/// A WGS84 point in decimal degrees. Construction enforces finiteness and
/// the latitude/longitude ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoordinate {
    lat: f64,
    lon: f64,
}

impl GeoCoordinate {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::invalid(format!(
                "coordinate components must be finite, got ({lat}, {lon})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::invalid(format!("latitude {lat} out of [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::invalid(format!("longitude {lon} out of [-180, 180]")));
        }
        Ok(GeoCoordinate { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl fmt::Display for GeoCoordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// How the literal(s) under a configured predicate encode a coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeoFormat {
    /// Single literal holding a decimal `lat lon` pair (also accepts a
    /// comma separator and WKT `POINT(lon lat)`).
    Point,
    /// Single literal holding two degree/minute/second/hemisphere
    /// quadruples, latitude first.
    Dms,
    /// Latitude and longitude live under two separate predicates; each
    /// component is a signed decimal or a single-axis DMS quadruple.
    Pair { lat: String, lon: String },
    /// No declared format: try `Point` parsing first, then `Dms`.
    Flexible,
}

/// One entry of the geo-predicate priority list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeoPredicate {
    pub predicate: String,
    pub format: GeoFormat,
}

/// Ordered priority list of geographic predicates. First match wins.
#[derive(Debug, Clone)]
pub struct GeoPredicateConfig {
    entries: Vec<GeoPredicate>,
}

/// The built-in priority list. It mirrors the geographic predicates commonly
/// found in Linked Data exports and is deliberately a configuration value:
/// deployments replace it by pointing the loader at their own file.
pub const DEFAULT_GEO_PREDICATES: &str = include_str!("default_geo_predicates.txt");

impl GeoPredicateConfig {
    /// Parses a config from its textual form: one predicate IRI per line in
    /// priority order, with an optional `:point` / `:dms` /
    /// `:pair(latpred,lonpred)` suffix. `#` starts a comment.
    pub fn parse(src: &str, file: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry = Self::parse_entry(line)
                .ok_or_else(|| Error::parse(file, idx + 1, format!("bad geo predicate `{line}`")))?;
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(Error::invalid(format!(
                "geo predicate config `{file}` declares no predicates"
            )));
        }
        Ok(GeoPredicateConfig { entries })
    }

    fn parse_entry(line: &str) -> Option<GeoPredicate> {
        if let Some(rest) = line.strip_suffix(":point") {
            return Some(GeoPredicate {
                predicate: rest.to_string(),
                format: GeoFormat::Point,
            });
        }
        if let Some(rest) = line.strip_suffix(":dms") {
            return Some(GeoPredicate {
                predicate: rest.to_string(),
                format: GeoFormat::Dms,
            });
        }
        if let Some(open) = line.find(":pair(") {
            let args = line[open + ":pair(".len()..].strip_suffix(')')?;
            let (lat, lon) = args.split_once(',')?;
            let (lat, lon) = (lat.trim(), lon.trim());
            if lat.is_empty() || lon.is_empty() {
                return None;
            }
            return Some(GeoPredicate {
                predicate: line[..open].to_string(),
                format: GeoFormat::Pair {
                    lat: lat.to_string(),
                    lon: lon.to_string(),
                },
            });
        }
        Some(GeoPredicate {
            predicate: line.to_string(),
            format: GeoFormat::Flexible,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src, &path.display().to_string())
    }

    pub fn entries(&self) -> &[GeoPredicate] {
        &self.entries
    }

    /// Number of distinct predicate IRIs mentioned anywhere in the list
    /// (pair entries mention two).
    pub fn distinct_predicate_count(&self) -> usize {
        let mut iris = std::collections::BTreeSet::new();
        for e in &self.entries {
            iris.insert(e.predicate.as_str());
            if let GeoFormat::Pair { lat, lon } = &e.format {
                iris.insert(lat.as_str());
                iris.insert(lon.as_str());
            }
        }
        iris.len()
    }
}

impl Default for GeoPredicateConfig {
    fn default() -> Self {
        Self::parse(DEFAULT_GEO_PREDICATES, "<default geo predicates>")
            .expect("built-in geo predicate list parses")
    }
}

/// Outcome of scanning one entity for coordinates.
pub(crate) struct GeoParseOutcome {
    pub coordinate: Option<GeoCoordinate>,
    /// True when at least one matched predicate produced an out-of-range
    /// value and was skipped.
    pub range_violation: bool,
}

/// Returns the first coordinate yielded by the configured predicate list,
/// or `None` when no predicate produces a complete, in-range coordinate.
/// Unparsable or out-of-range values skip to the next configured predicate.
pub fn parse_geo_coordinates(entity: &Entity, config: &GeoPredicateConfig) -> Option<GeoCoordinate> {
    parse_geo_detailed(entity, config).coordinate
}

pub(crate) fn parse_geo_detailed(entity: &Entity, config: &GeoPredicateConfig) -> GeoParseOutcome {
    let mut range_violation = false;
    for entry in &config.entries {
        let parsed = match &entry.format {
            GeoFormat::Point => first_literal(entity, &entry.predicate).and_then(parse_point),
            GeoFormat::Dms => first_literal(entity, &entry.predicate).and_then(parse_dms_pair),
            GeoFormat::Flexible => first_literal(entity, &entry.predicate)
                .and_then(|lit| parse_point(lit).or_else(|| parse_dms_pair(lit))),
            GeoFormat::Pair { lat, lon } => {
                let lat_v = first_literal(entity, lat).and_then(parse_component);
                let lon_v = first_literal(entity, lon).and_then(parse_component);
                match (lat_v, lon_v) {
                    (Some(a), Some(b)) => Some((a, b)),
                    _ => None,
                }
            }
        };
        if let Some((lat, lon)) = parsed {
            match GeoCoordinate::new(lat, lon) {
                Ok(c) => {
                    return GeoParseOutcome {
                        coordinate: Some(c),
                        range_violation,
                    }
                }
                Err(_) => {
                    range_violation = true;
                    continue;
                }
            }
        }
    }
    GeoParseOutcome {
        coordinate: None,
        range_violation,
    }
}

fn first_literal<'a>(entity: &'a Entity, predicate: &str) -> Option<&'a str> {
    entity.predicates.get(predicate).and_then(|values| {
        values.iter().find_map(|v| match v {
            PredicateValue::Literal(s) => Some(s.as_str()),
            PredicateValue::Iri(_) => None,
        })
    })
}

fn parse_decimal(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// `"51.38 -2.36"`, `"51.38, -2.36"` or WKT `"POINT(-2.36 51.38)"`.
fn parse_point(literal: &str) -> Option<(f64, f64)> {
    let lit = literal.trim();
    if let Some(inner) = lit
        .strip_prefix("POINT(")
        .or_else(|| lit.strip_prefix("Point("))
        .or_else(|| lit.strip_prefix("point("))
        .and_then(|rest| rest.strip_suffix(')'))
    {
        // WKT stores longitude first.
        let (lon, lat) = two_decimals(inner)?;
        return Some((lat, lon));
    }
    two_decimals(lit)
}

fn two_decimals(s: &str) -> Option<(f64, f64)> {
    let parts: Vec<&str> = s
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter(|p| !p.is_empty())
        .collect();
    if parts.len() != 2 {
        return None;
    }
    Some((parse_decimal(parts[0])?, parse_decimal(parts[1])?))
}

fn dms_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"(?x)
            ([+-]?\d+(?:\.\d+)?)\s*(?:°|º|d\b|deg\b)?          # degrees
            (?:\s*(\d+(?:\.\d+)?)\s*(?:′|’|'|m\b|min\b)?)?     # minutes
            (?:\s*(\d+(?:\.\d+)?)\s*(?:″|”|''|"|s\b|sec\b)?)?  # seconds
            \s*([NSEWnsew])?                                   # hemisphere
            "#,
        )
        .expect("DMS regex compiles")
    })
}

/// A single axis in degree/minute/second/hemisphere quadruple form, e.g.
/// `51° 22′ 48″ N`. Decimal degrees are `deg + min/60 + sec/3600`; an `S` or
/// `W` hemisphere (or an explicit sign on the degrees) negates the value.
fn parse_dms_component(s: &str) -> Option<f64> {
    let trimmed = s.trim();
    let caps = dms_regex().captures(trimmed)?;
    // The whole component must be consumed, otherwise `51.38 -2.36` would
    // parse as a single DMS axis.
    let whole = caps.get(0)?;
    if whole.start() != 0 || whole.end() != trimmed.len() {
        return None;
    }
    let deg: f64 = caps.get(1)?.as_str().parse().ok()?;
    let minutes: f64 = match caps.get(2) {
        Some(m) => m.as_str().parse().ok()?,
        None => 0.0,
    };
    let seconds: f64 = match caps.get(3) {
        Some(m) => m.as_str().parse().ok()?,
        None => 0.0,
    };
    let magnitude = deg.abs() + minutes / 60.0 + seconds / 3600.0;
    let value = match caps.get(4).map(|h| h.as_str().to_ascii_uppercase()) {
        Some(h) if h == "S" || h == "W" => -magnitude,
        Some(_) => magnitude,
        None if deg.is_sign_negative() => -magnitude,
        None => magnitude,
    };
    value.is_finite().then_some(value)
}

/// Accepts either a decimal value or a DMS quadruple for one axis.
fn parse_component(s: &str) -> Option<f64> {
    parse_decimal(s).or_else(|| {
        let v = parse_dms_component(s)?;
        // A bare number already failed `parse_decimal`, so a successful DMS
        // parse here carried at least minutes or a hemisphere.
        Some(v)
    })
}

/// Two DMS quadruples in one literal, latitude first. Axes are separated by
/// a comma or semicolon, or split at the latitude hemisphere letter.
fn parse_dms_pair(literal: &str) -> Option<(f64, f64)> {
    let lit = literal.trim();
    if let Some((a, b)) = lit.split_once([',', ';']) {
        let lat = parse_dms_component(a)?;
        let lon = parse_dms_component(b)?;
        return Some((lat, lon));
    }
    // No separator: split right after the first N/S hemisphere letter.
    for (i, c) in lit.char_indices() {
        if matches!(c, 'N' | 'S' | 'n' | 's') {
            let (a, b) = lit.split_at(i + 1);
            if let (Some(lat), Some(lon)) = (parse_dms_component(a), parse_dms_component(b)) {
                return Some((lat, lon));
            }
        }
    }
    None
}
