//! Deterministic synthetic gazetteer and corpus generator.
//!
//! Builds a knowledge graph of invented places (cities linked to country
//! hubs, with abstracts, classes, page statistics and mixed coordinate
//! formats), a set of template documents mentioning those places, an alias
//! table and node embeddings. Three difficulty mechanisms mirror real
//! geoparsing failure modes:
//!
//! * homonym places — a second geographic entity with the same name far
//!   away; a fraction of them outrank the true place in the alias counts,
//!   so the annotator starts at the wrong geographic entity;
//! * concept homonyms — a non-geographic entity with the same name whose
//!   alias count dominates, so the annotator starts at a non-geographic
//!   node and only graph expansion can recover the place (at 1 or 2 hops);
//! * sibling cities — every city shares its country hub with ~8 others,
//!   so topological expansion always retrieves wrong-but-plausible
//!   candidates that selection must rank down.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::annotate::{Document, GroundTruthLocation};
use crate::embed::EmbeddingStore;
use crate::error::Result;
use crate::kg::{EntityId, GeoCoordinate, GeoPredicateConfig, KnowledgeGraph, KnowledgeGraphBuilder};
use crate::pipeline::geo_distance;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_places: usize,
    pub n_countries: usize,
    pub n_docs: usize,
    /// Fraction of places that get a same-name geographic homonym.
    pub homonym_rate: f64,
    /// Fraction of the homonym places whose alias counts favor the homonym,
    /// making the annotator start at the wrong geographic entity.
    pub misdirection_rate: f64,
    /// Fraction of places that get a same-name non-geographic concept
    /// entity with a dominating alias count.
    pub concept_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_places: 320,
            n_countries: 40,
            n_docs: 300,
            homonym_rate: 0.15,
            misdirection_rate: 0.25,
            concept_rate: 0.20,
            seed: 17,
        }
    }
}

#[derive(Debug)]
pub struct SynthCorpus {
    pub kg: KnowledgeGraph,
    pub documents: Vec<Document>,
    /// `(form, iri, count)` alias rows.
    pub aliases: Vec<(String, String, u64)>,
    pub embeddings: EmbeddingStore,
}

const NAME_HEADS: [&str; 26] = [
    "Al", "Bar", "Cor", "Dan", "El", "For", "Gar", "Hol", "Ist", "Jor", "Kal", "Lun", "Mar",
    "Nor", "Or", "Pra", "Quin", "Ros", "Sal", "Tor", "Ul", "Vor", "Wil", "Xan", "Yor", "Zan",
];
const NAME_TAILS: [&str; 16] = [
    "ba", "den", "field", "gate", "ham", "ia", "kirk", "land", "mond", "nor", "port", "ria",
    "stad", "ton", "ville", "wick",
];

const ONE_LOC_TEMPLATES: [&str; 6] = [
    "Just arrived in {0}! The weather is lovely.",
    "Heavy rain flooding the streets near {0} tonight.",
    "Our correspondent reports from {0} this morning.",
    "Road closures around {0} after the parade.",
    "Big crowds in {0} for the festival today.",
    "Power outage reported across {0}, crews on site.",
];
const TWO_LOC_TEMPLATES: [&str; 3] = [
    "Travelling from {0} to {1} by train tomorrow.",
    "The match between {0} and {1} kicks off at noon.",
    "Flights between {0} and {1} resume next week.",
];
const NO_LOC_TEMPLATES: [&str; 5] = [
    "What a quiet afternoon. Tea and a good book.",
    "Finally finished that report. Time to relax.",
    "Coffee first, then the gym. Same as always.",
    "New phone arrived today and the battery is great.",
    "Rewatched my favourite film tonight. Still brilliant.",
];

fn place_names(n: usize, rng: &mut ChaCha12Rng) -> Vec<String> {
    let mut names: Vec<String> = NAME_HEADS
        .iter()
        .flat_map(|h| NAME_TAILS.iter().map(move |t| format!("{h}{t}")))
        .collect();
    names.shuffle(rng);
    names.truncate(n);
    assert!(names.len() == n, "name pool exhausted: need {n}");
    names
}

fn scatter_coordinates(n: usize, min_km: f64, rng: &mut ChaCha12Rng) -> Vec<GeoCoordinate> {
    let mut points: Vec<GeoCoordinate> = Vec::with_capacity(n);
    while points.len() < n {
        let lat = rng.gen_range(-55.0..65.0);
        let lon = rng.gen_range(-175.0..175.0);
        let c = GeoCoordinate::new(lat, lon).expect("sampled in range");
        if points.iter().all(|p| geo_distance(*p, c) >= min_km) {
            points.push(c);
        }
    }
    points
}

fn unit_vector(dim: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

fn blend(base: &[f64], noise: &[f64], noise_weight: f64) -> Vec<f64> {
    let mut v: Vec<f64> = base
        .iter()
        .zip(noise)
        .map(|(b, n)| b + noise_weight * n)
        .collect();
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

fn write_coordinate(entity: &mut crate::kg::Entity, c: GeoCoordinate, variant: usize) {
    match variant % 3 {
        0 => {
            entity.add_literal(
                "http://www.georss.org/georss/point",
                format!("{} {}", c.lat(), c.lon()),
            );
        }
        1 => {
            entity.add_literal(
                "http://www.w3.org/2003/01/geo/wgs84_pos#lat",
                c.lat().to_string(),
            );
            entity.add_literal(
                "http://www.w3.org/2003/01/geo/wgs84_pos#long",
                c.lon().to_string(),
            );
        }
        _ => {
            // Degree/minute/second quadruples, rounded to the nearest
            // arc-second. Rounding keeps the point well inside the matching
            // threshold (< 50 m).
            let dms = |v: f64, pos: char, neg: char| -> String {
                let h = if v < 0.0 { neg } else { pos };
                let a = v.abs();
                let deg = a.floor();
                let minutes = ((a - deg) * 60.0).floor();
                let seconds = (((a - deg) * 60.0 - minutes) * 60.0 * 10.0).round() / 10.0;
                format!("{deg}° {minutes}′ {seconds}″ {h}")
            };
            entity.add_literal(
                "http://dbpedia.org/property/coordinatesDms",
                format!("{}, {}", dms(c.lat(), 'N', 'S'), dms(c.lon(), 'E', 'W')),
            );
        }
    }
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let names = place_names(config.n_places, &mut rng);
    let n_homonyms = (config.n_places as f64 * config.homonym_rate).round() as usize;
    let n_concepts = (config.n_places as f64 * config.concept_rate).round() as usize;
    let n_misdirected = (n_homonyms as f64 * config.misdirection_rate).round() as usize;
    assert!(
        n_homonyms + n_concepts <= config.n_places,
        "homonym and concept fractions overlap"
    );
    // One pool keeps every geographic entity (places and homonyms alike)
    // at least 120 km from every other, so a 50 km matching threshold can
    // never confuse two of them.
    let mut coordinates = scatter_coordinates(config.n_places + n_homonyms, 120.0, &mut rng);
    let homonym_coords = coordinates.split_off(config.n_places);
    let dim = 16;

    let mut builder = KnowledgeGraphBuilder::new();
    let mut embeddings = EmbeddingStore::new(dim);
    let mut aliases: Vec<(String, String, u64)> = Vec::new();

    // Country hubs: non-geographic link targets arranged in a ring.
    let mut country_vecs = Vec::with_capacity(config.n_countries);
    for k in 0..config.n_countries {
        let iri = format!("syn:country{k:03}");
        let entity = builder
            .add_entity(&iri, &format!("Republic of C{k:02}"))
            .expect("fresh country iri");
        entity
            .classes
            .insert("http://dbpedia.org/ontology/Country".into());
        let vec = unit_vector(dim, &mut rng);
        embeddings
            .insert(EntityId::new(&iri).expect("valid iri"), vec.clone())
            .expect("dimension matches");
        country_vecs.push(vec);
    }
    for k in 0..config.n_countries {
        let next = (k + 1) % config.n_countries;
        if next != k {
            builder
                .add_link(
                    &format!("syn:country{k:03}"),
                    "http://dbpedia.org/ontology/borders",
                    &format!("syn:country{next:03}"),
                )
                .expect("countries exist");
        }
    }

    for (i, name) in names.iter().enumerate() {
        let iri = format!("syn:place{i:04}");
        let country = i % config.n_countries;
        let country_label = format!("Republic of C{country:02}");
        // Long abstracts mention the name one to three times on both the
        // true place and its homonym, so mention counts alone cannot
        // separate them.
        let place_mentions = rng.gen_range(1..=3usize);
        let homonym_mentions = rng.gen_range(1..=3usize);
        {
            let entity = builder.add_entity(&iri, name).expect("fresh place iri");
            entity
                .classes
                .insert("http://dbpedia.org/ontology/City".into());
            entity.short_abstract = Some(format!("{name} is a city in the {country_label}."));
            let mut long = format!("{name} is a city in the {country_label}.");
            long.push_str(" The area nearby is known for its markets.");
            if place_mentions >= 2 {
                long.push_str(&format!(" Many travellers pass through {name} on the northern route."));
            }
            if place_mentions >= 3 {
                long.push_str(&format!(" A festival is held in {name} each spring."));
            }
            entity.long_abstract = Some(long);
            entity.page_length = Some(800 + (i as u64 * 37) % 4200);
            write_coordinate(entity, coordinates[i], i);
        }
        builder
            .add_link(&iri, "http://dbpedia.org/ontology/country", &format!("syn:country{country:03}"))
            .expect("entities exist");
        embeddings
            .insert(
                EntityId::new(&iri).expect("valid iri"),
                blend(&country_vecs[country], &unit_vector(dim, &mut rng), 0.5),
            )
            .expect("dimension matches");

        if i < n_homonyms {
            // Same-name geographic homonym in a different country.
            let hiri = format!("syn:homonym{i:04}");
            let hcountry = (country + config.n_countries / 2) % config.n_countries;
            {
                let entity = builder.add_entity(&hiri, name).expect("fresh homonym iri");
                entity
                    .classes
                    .insert("http://dbpedia.org/ontology/Village".into());
                entity.short_abstract = Some(format!("{name} is a small village."));
                let mut long = format!("{name} is a small village.");
                long.push_str(" Few visitors come by in winter.");
                if homonym_mentions >= 2 {
                    long.push_str(&format!(" The name {name} is shared with larger places elsewhere."));
                }
                if homonym_mentions >= 3 {
                    long.push_str(&format!(" A single road leads into {name} from the coast."));
                }
                entity.long_abstract = Some(long);
                entity.page_length = Some(100 + (i as u64 * 13) % 300);
                write_coordinate(entity, homonym_coords[i], i + 1);
            }
            builder
                .add_link(&hiri, "http://dbpedia.org/ontology/country", &format!("syn:country{hcountry:03}"))
                .expect("entities exist");
            embeddings
                .insert(
                    EntityId::new(&hiri).expect("valid iri"),
                    blend(&country_vecs[hcountry], &unit_vector(dim, &mut rng), 0.7),
                )
                .expect("dimension matches");
            let (place_count, homonym_count) = if i < n_misdirected { (4, 6) } else { (9, 1) };
            aliases.push((name.to_lowercase(), iri.clone(), place_count));
            aliases.push((name.to_lowercase(), hiri, homonym_count));
        } else if i < n_homonyms + n_concepts {
            // Same-name non-geographic concept; the place is 1 or 2 hops
            // away from it through ordinary object links.
            let ciri = format!("syn:concept{i:04}");
            {
                let entity = builder.add_entity(&ciri, name).expect("fresh concept iri");
                entity
                    .classes
                    .insert("http://dbpedia.org/ontology/Work".into());
                entity.short_abstract =
                    Some(format!("{name} is a term used for a common household object."));
                entity.page_length = Some(300 + (i as u64 * 7) % 500);
            }
            if i % 2 == 0 {
                builder
                    .add_link(&ciri, "http://dbpedia.org/ontology/namedAfter", &iri)
                    .expect("entities exist");
            } else {
                let biri = format!("syn:bridge{i:04}");
                builder
                    .add_entity(&biri, &format!("{name} tradition"))
                    .expect("fresh bridge iri");
                builder
                    .add_link(&ciri, "http://dbpedia.org/ontology/related", &biri)
                    .expect("entities exist");
                builder
                    .add_link(&biri, "http://dbpedia.org/ontology/origin", &iri)
                    .expect("entities exist");
            }
            embeddings
                .insert(
                    EntityId::new(&ciri).expect("valid iri"),
                    unit_vector(dim, &mut rng),
                )
                .expect("dimension matches");
            aliases.push((name.to_lowercase(), ciri, 8));
            aliases.push((name.to_lowercase(), iri.clone(), 2));
        }
    }

    let (kg, warnings) = builder.build(&GeoPredicateConfig::default());
    assert_eq!(warnings, 0, "synthetic coordinates are always in range");

    // Documents.
    let n_empty = config.n_docs / 4;
    let n_two = (config.n_docs as f64 * 0.15).round() as usize;
    let n_one = config.n_docs - n_empty - n_two;
    let mut documents = Vec::with_capacity(config.n_docs);
    let place_of = |rng: &mut ChaCha12Rng| -> usize { rng.gen_range(0..config.n_places) };
    for d in 0..config.n_docs {
        let id = format!("doc{d:04}");
        let (text, truth): (String, Vec<GroundTruthLocation>) = if d < n_empty {
            let template = NO_LOC_TEMPLATES[d % NO_LOC_TEMPLATES.len()];
            (template.to_string(), Vec::new())
        } else if d < n_empty + n_one {
            let p = place_of(&mut rng);
            let template = ONE_LOC_TEMPLATES[d % ONE_LOC_TEMPLATES.len()];
            (
                template.replace("{0}", &names[p]),
                vec![GroundTruthLocation {
                    coordinate: coordinates[p],
                    entity: Some(EntityId::new(format!("syn:place{p:04}")).expect("valid iri")),
                }],
            )
        } else {
            let p = place_of(&mut rng);
            let mut q = place_of(&mut rng);
            while q == p {
                q = place_of(&mut rng);
            }
            let template = TWO_LOC_TEMPLATES[d % TWO_LOC_TEMPLATES.len()];
            (
                template.replace("{0}", &names[p]).replace("{1}", &names[q]),
                vec![
                    GroundTruthLocation {
                        coordinate: coordinates[p],
                        entity: Some(EntityId::new(format!("syn:place{p:04}")).expect("valid iri")),
                    },
                    GroundTruthLocation {
                        coordinate: coordinates[q],
                        entity: Some(EntityId::new(format!("syn:place{q:04}")).expect("valid iri")),
                    },
                ],
            )
        };
        documents.push(Document {
            id,
            text,
            ground_truth: truth,
        });
    }

    SynthCorpus {
        kg,
        documents,
        aliases,
        embeddings,
    }
}

/// Writes the corpus as the pipeline's file formats: `kg.tsv`,
/// `dataset.jsonl`, `aliases.tsv` and `vectors.tsv`.
pub fn write_to_dir(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut kg_out = String::new();
    for entity in corpus.kg.entities() {
        writeln!(kg_out, "E\t{}\t{}", entity.id, entity.label).expect("write to string");
        for (pred, values) in &entity.predicates {
            for v in values {
                match v {
                    crate::kg::PredicateValue::Iri(t) => {
                        writeln!(kg_out, "P\t{}\t{pred}\t@{t}", entity.id).expect("write to string")
                    }
                    crate::kg::PredicateValue::Literal(l) => {
                        writeln!(kg_out, "P\t{}\t{pred}\t{l}", entity.id).expect("write to string")
                    }
                }
            }
        }
        for class in &entity.classes {
            writeln!(kg_out, "C\t{}\t{class}", entity.id).expect("write to string");
        }
        for s in &entity.same_as {
            writeln!(kg_out, "S\t{}\t{s}", entity.id).expect("write to string");
        }
        if let Some(a) = &entity.short_abstract {
            writeln!(kg_out, "A\t{}\tshort\t{a}", entity.id).expect("write to string");
        }
        if let Some(a) = &entity.long_abstract {
            writeln!(kg_out, "A\t{}\tlong\t{a}", entity.id).expect("write to string");
        }
        if let Some(n) = entity.page_length {
            writeln!(kg_out, "L\t{}\t{n}", entity.id).expect("write to string");
        }
    }
    std::fs::write(dir.join("kg.tsv"), kg_out)
        .map_err(|e| crate::error::Error::io(dir.join("kg.tsv"), e))?;

    crate::pipeline::save_dataset(&dir.join("dataset.jsonl"), &corpus.documents)?;

    let mut alias_out = String::new();
    for (form, iri, count) in &corpus.aliases {
        writeln!(alias_out, "{form}\t{iri}\t{count}").expect("write to string");
    }
    std::fs::write(dir.join("aliases.tsv"), alias_out)
        .map_err(|e| crate::error::Error::io(dir.join("aliases.tsv"), e))?;

    let mut vec_out = format!("dim {}\n", corpus.embeddings.dim());
    for id in corpus.embeddings.ids() {
        let comps: Vec<String> = corpus
            .embeddings
            .get(id)
            .expect("id from store")
            .iter()
            .map(|v| v.to_string())
            .collect();
        writeln!(vec_out, "{id}\t{}", comps.join(" ")).expect("write to string");
    }
    std::fs::write(dir.join("vectors.tsv"), vec_out)
        .map_err(|e| crate::error::Error::io(dir.join("vectors.tsv"), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            n_places: 40,
            n_countries: 8,
            n_docs: 30,
            ..SynthConfig::default()
        };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.kg.content_checksum(), b.kg.content_checksum());
        assert_eq!(a.documents.len(), b.documents.len());
        for (x, y) in a.documents.iter().zip(&b.documents) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.text, y.text);
        }
    }

    #[test]
    fn corpus_roundtrips_through_files() {
        let cfg = SynthConfig {
            n_places: 25,
            n_countries: 5,
            n_docs: 12,
            ..SynthConfig::default()
        };
        let corpus = generate(&cfg);
        let dir = tempfile::tempdir().unwrap();
        write_to_dir(&corpus, dir.path()).unwrap();
        let (kg, stats) = crate::kg::load_knowledge_graph(
            &dir.path().join("kg.tsv"),
            &GeoPredicateConfig::default(),
        )
        .unwrap();
        assert_eq!(stats.geo_range_warnings, 0);
        assert_eq!(kg.len(), corpus.kg.len());
        // DMS serialization rounds to 0.1 arc-second, so coordinates agree
        // to within ~5 m rather than bit-exactly.
        for (id, c) in corpus.kg.geo_entities() {
            let loaded = kg.coordinate(id).expect("geo entity survives roundtrip");
            assert!(geo_distance(*c, loaded) < 0.05, "{id} moved");
        }
        let docs = crate::pipeline::load_dataset(&dir.path().join("dataset.jsonl")).unwrap();
        assert_eq!(docs.len(), corpus.documents.len());
        let vectors = EmbeddingStore::load(&dir.path().join("vectors.tsv")).unwrap();
        assert_eq!(vectors.len(), corpus.embeddings.len());
    }

    #[test]
    fn all_places_are_geo_tagged() {
        let cfg = SynthConfig {
            n_places: 30,
            n_countries: 6,
            n_docs: 5,
            ..SynthConfig::default()
        };
        let corpus = generate(&cfg);
        for i in 0..cfg.n_places {
            let id = EntityId::new(format!("syn:place{i:04}")).unwrap();
            assert!(corpus.kg.is_geo(&id), "place {i} lacks coordinates");
        }
    }
}
