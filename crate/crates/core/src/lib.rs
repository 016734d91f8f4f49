//! Geoparsing over a knowledge graph.
//!
//! The pipeline identifies location mentions in short texts, links each
//! mention to a starting entity in a knowledge-graph snapshot, expands the
//! starting entity into an ordered vector of geographic candidates by
//! traversing the graph, scores every candidate with a tree-ensemble
//! regressor, and emits the coordinate of the best-scoring candidate.
//!
//! Modules follow the processing order:
//!
//! * [`kg`] — immutable knowledge-graph store, coordinate parsing,
//!   `sameAs` closures and ontology granularity;
//! * [`annotate`] — surface-form lexicon annotator and ingestion of
//!   externally produced annotations;
//! * [`embed`] — node-embedding store and cosine similarity;
//! * [`expand`] — the four candidate-expansion strategies plus their
//!   evaluation metrics (maximum theoretical recall, Jaccard distance);
//! * [`features`] — the 31-regressor feature vector for one
//!   (annotation, candidate) pair;
//! * [`select`] — candidate labeling, GBDT/RF/DART training, hyperparameter
//!   search, threshold calibration and feature importance;
//! * [`pipeline`] — end-to-end orchestration, evaluation metrics, dataset
//!   splitting and reports;
//! * [`synth`] — deterministic synthetic gazetteer/corpus generator used by
//!   the test harness and the `synth` CLI command.

pub mod annotate;
pub mod embed;
pub mod error;
pub mod expand;
pub mod features;
pub mod kg;
pub mod pipeline;
pub mod select;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
