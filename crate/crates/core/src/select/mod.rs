//! Best-candidate selection: labeling, tree-ensemble regression, threshold
//! calibration and feature importance.
//!
//! Selection is cast as a regression task: every candidate of an annotation
//! gets a ground-truth confidence score derived from its geographic
//! distance to the truth (0 beyond the threshold, otherwise a descending
//! rank starting at `L of the nearest), and an additive tree ensemble
//! learns to predict that score. At inference the candidate with the
//! highest predicted score wins unless it falls below the calibrated
//! threshold `c_th`.

pub mod calibrate;
pub mod search;
mod tree;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expand::Candidate;
use crate::features::{FeatureGroup, FeatureSchema, FeatureVector};
use crate::kg::GeoCoordinate;
use crate::pipeline::geo_distance;

pub use calibrate::{calibrate_threshold, CalibrationDoc, ScoredAnnotation};
pub use search::{random_search, FloatDist, IntDist, ParamDistributions, SearchOutcome};
pub use tree::{DecisionTree, DenseData, TreeParams};

/// Identifies the candidate set an instance belongs to: one annotation of
/// one document. Cross-validation folds never split a document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub document_id: String,
    pub span: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub features: FeatureVector,
    /// Ground-truth confidence score: 0 or a rank in `{1, …, L}`.
    pub label: f64,
    pub group: GroupKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Gbdt,
    RandomForest,
    Dart,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Gbdt => "gbdt",
            Algorithm::RandomForest => "random-forest",
            Algorithm::Dart => "dart",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        match s {
            "gbdt" => Some(Algorithm::Gbdt),
            "random-forest" | "rf" => Some(Algorithm::RandomForest),
            "dart" => Some(Algorithm::Dart),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub num_trees: usize,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub feature_subsample: f64,
    pub row_subsample: f64,
    pub dart_drop_rate: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            num_trees: 200,
            max_leaves: 31,
            max_depth: 8,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            feature_subsample: 0.8,
            row_subsample: 0.8,
            dart_drop_rate: 0.1,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.max_leaves < 2 {
            return Err(Error::invalid("max_leaves must be at least 2"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must be in (0, 1]"));
        }
        for (name, v) in [
            ("feature_subsample", self.feature_subsample),
            ("row_subsample", self.row_subsample),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must be in (0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.dart_drop_rate) {
            return Err(Error::invalid("dart_drop_rate must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Additive ensemble of regression trees. Prediction is
/// `base + Σ weight_i · tree_i(x)`; random-forest weights are `1/n` so the
/// same formula realizes the bagged mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionEnsemble {
    pub algorithm: Algorithm,
    pub hyperparameters: Hyperparameters,
    base_prediction: f64,
    trees: Vec<DecisionTree>,
    tree_weights: Vec<f64>,
    /// Cumulative split gain per logical feature name.
    feature_gain: BTreeMap<String, f64>,
    dense_width: usize,
}

impl RegressionEnsemble {
    pub fn base_prediction(&self) -> f64 {
        self.base_prediction
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> impl Iterator<Item = (&DecisionTree, f64)> + '_ {
        self.trees.iter().zip(self.tree_weights.iter().copied())
    }

    pub fn predict(&self, features: &FeatureVector) -> f64 {
        self.predict_dense(&features.to_dense())
            .expect("schema-produced rows have the right arity")
    }

    pub fn predict_dense(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.dense_width {
            return Err(Error::invalid(format!(
                "feature row has arity {}, model expects {}",
                row.len(),
                self.dense_width
            )));
        }
        let mut out = self.base_prediction;
        for (tree, w) in self.trees.iter().zip(&self.tree_weights) {
            out += w * tree.predict_row(row);
        }
        Ok(out)
    }

    pub fn per_feature_gain(&self) -> &BTreeMap<String, f64> {
        &self.feature_gain
    }
}

/// Trained ensemble plus the calibrated confidence threshold.
#[derive(Debug, Clone)]
pub struct SelectionModel {
    pub ensemble: RegressionEnsemble,
    /// Candidates scoring below this are discarded; `f64::NEG_INFINITY`
    /// keeps everything.
    pub c_th: f64,
}

impl SelectionModel {
    pub fn uncalibrated(ensemble: RegressionEnsemble) -> Self {
        SelectionModel {
            ensemble,
            c_th: f64::NEG_INFINITY,
        }
    }
}

/// Assigns ground-truth confidence scores to one annotation's candidates.
/// Candidates at geographic distance ≥ `threshold_km` from every truth get
/// 0; the rest are ranked by distance (ties by `EntityId`): nearest `l`,
/// next `l−1`, and so on. Output preserves input order.
pub fn label_candidates(
    candidates: &[Candidate],
    truths: &[GeoCoordinate],
    l: usize,
    threshold_km: f64,
) -> Vec<(Candidate, f64)> {
    let distances: Vec<f64> = candidates
        .iter()
        .map(|c| {
            truths
                .iter()
                .map(|t| geo_distance(c.coordinate, *t))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut within: Vec<usize> = (0..candidates.len())
        .filter(|&i| distances[i] < threshold_km)
        .collect();
    within.sort_by(|&a, &b| {
        distances[a]
            .total_cmp(&distances[b])
            .then_with(|| candidates[a].entity.cmp(&candidates[b].entity))
    });
    let mut labels = vec![0.0; candidates.len()];
    for (rank, idx) in within.into_iter().enumerate() {
        labels[idx] = (l.saturating_sub(rank)).max(1) as f64;
    }
    candidates
        .iter()
        .cloned()
        .zip(labels)
        .collect()
}

/// The highest-scoring candidate (ties by `EntityId`), ignoring any
/// threshold. `None` for an empty set.
pub fn argmax_candidate(scored: &[(Candidate, f64)]) -> Option<&(Candidate, f64)> {
    scored.iter().max_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then_with(|| b.0.entity.cmp(&a.0.entity))
    })
}

/// The selection rule: argmax over predicted scores, discarded when the
/// best score falls below the model's threshold.
pub fn select_best<'a>(
    model: &SelectionModel,
    scored: &'a [(Candidate, f64)],
) -> Option<&'a (Candidate, f64)> {
    argmax_candidate(scored).filter(|(_, score)| *score >= model.c_th)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn subsample_rows(rng: &mut ChaCha12Rng, n: usize, fraction: f64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..n).collect();
    }
    let k = ((n as f64 * fraction).floor() as usize).max(1);
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

fn bootstrap_rows(rng: &mut ChaCha12Rng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    idx.sort_unstable();
    idx
}

fn subsample_features(rng: &mut ChaCha12Rng, width: usize, fraction: f64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..width).collect();
    }
    let k = ((width as f64 * fraction).ceil() as usize).clamp(1, width);
    let mut idx = rand::seq::index::sample(rng, width, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Trains an ensemble. Deterministic: a fixed seed reproduces the model
/// bit for bit.
///
/// * GBDT — squared-error boosting; each tree fits the residuals of the
///   running prediction and is added with the learning rate as weight.
/// * Random forest — trees fit `label − base` on bootstrap rows with
///   per-tree feature subsets; prediction is the bagged mean.
/// * DART — boosting where each round drops a random subset of prior trees
///   when computing residuals; the new tree joins with weight
///   `learning_rate / (k+1)` and the `k` dropped trees shrink by
///   `k / (k+1)`.
pub fn train(
    instances: &[LabeledInstance],
    algorithm: Algorithm,
    params: &Hyperparameters,
    seed: u64,
) -> Result<RegressionEnsemble> {
    if instances.is_empty() {
        return Err(Error::invalid("cannot train on an empty instance set"));
    }
    params.validate()?;
    for inst in instances {
        if !inst.features.is_finite() || !inst.label.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite feature or label in group {:?}",
                inst.group
            )));
        }
    }
    let schema = FeatureSchema::get();
    let rows: Vec<Vec<f64>> = instances.iter().map(|i| i.features.to_dense()).collect();
    let labels: Vec<f64> = instances.iter().map(|i| i.label).collect();
    let data = DenseData::from_rows(&rows);
    let n = data.n_rows();
    let width = data.width();
    let base = mean(labels.iter().copied());
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        max_leaves: params.max_leaves,
        min_samples_leaf: params.min_samples_leaf,
    };
    let mut master = ChaCha12Rng::seed_from_u64(seed);
    let mut gains = vec![0.0; width];
    let mut trees: Vec<DecisionTree> = Vec::with_capacity(params.num_trees);
    let mut weights: Vec<f64> = Vec::with_capacity(params.num_trees);
    // Per-tree predictions, kept for DART's residual recomputation.
    let mut tree_preds: Vec<Vec<f64>> = Vec::with_capacity(params.num_trees);
    let mut running: Vec<f64> = vec![base; n];

    for _ in 0..params.num_trees {
        let tree_seed = master.gen::<u64>();
        let mut rng = ChaCha12Rng::seed_from_u64(tree_seed);
        match algorithm {
            Algorithm::Gbdt => {
                let sample = subsample_rows(&mut rng, n, params.row_subsample);
                let features = subsample_features(&mut rng, width, params.feature_subsample);
                let residuals: Vec<f64> =
                    (0..n).map(|i| labels[i] - running[i]).collect();
                let tree = tree::fit_tree(&data, &residuals, sample, &features, &tree_params, &mut gains);
                let preds: Vec<f64> = rows.iter().map(|r| tree.predict_row(r)).collect();
                for i in 0..n {
                    running[i] += params.learning_rate * preds[i];
                }
                trees.push(tree);
                weights.push(params.learning_rate);
                tree_preds.push(preds);
            }
            Algorithm::RandomForest => {
                let sample = bootstrap_rows(&mut rng, n);
                let features = subsample_features(&mut rng, width, params.feature_subsample);
                let centered: Vec<f64> = labels.iter().map(|y| y - base).collect();
                let tree = tree::fit_tree(&data, &centered, sample, &features, &tree_params, &mut gains);
                let preds: Vec<f64> = rows.iter().map(|r| tree.predict_row(r)).collect();
                trees.push(tree);
                weights.push(0.0); // rescaled to 1/n below
                tree_preds.push(preds);
            }
            Algorithm::Dart => {
                let dropped: Vec<usize> = (0..trees.len())
                    .filter(|_| rng.gen::<f64>() < params.dart_drop_rate)
                    .collect();
                let k = dropped.len();
                let mut partial: Vec<f64> = vec![base; n];
                for (m, preds) in tree_preds.iter().enumerate() {
                    if dropped.binary_search(&m).is_ok() {
                        continue;
                    }
                    let w = weights[m];
                    for i in 0..n {
                        partial[i] += w * preds[i];
                    }
                }
                let residuals: Vec<f64> = (0..n).map(|i| labels[i] - partial[i]).collect();
                let sample = subsample_rows(&mut rng, n, params.row_subsample);
                let features = subsample_features(&mut rng, width, params.feature_subsample);
                let tree = tree::fit_tree(&data, &residuals, sample, &features, &tree_params, &mut gains);
                let preds: Vec<f64> = rows.iter().map(|r| tree.predict_row(r)).collect();
                let scale = k as f64 / (k as f64 + 1.0);
                for &m in &dropped {
                    weights[m] *= scale;
                }
                trees.push(tree);
                weights.push(params.learning_rate / (k as f64 + 1.0));
                tree_preds.push(preds);
            }
        }
    }
    if algorithm == Algorithm::RandomForest && !trees.is_empty() {
        let w = 1.0 / trees.len() as f64;
        weights.fill(w);
    }
    let mut feature_gain: BTreeMap<String, f64> = schema
        .names()
        .map(|name| (name.to_string(), 0.0))
        .collect();
    for (col, gain) in gains.iter().enumerate() {
        if *gain > 0.0 {
            let logical = schema.logical_of_column(col);
            *feature_gain
                .get_mut(schema.name(logical))
                .expect("schema names initialized") += gain;
        }
    }
    Ok(RegressionEnsemble {
        algorithm,
        hyperparameters: *params,
        base_prediction: base,
        trees,
        tree_weights: weights,
        feature_gain,
        dense_width: width,
    })
}

/// Root-mean-squared error of the ensemble over labeled instances.
pub fn rmse(ensemble: &RegressionEnsemble, instances: &[LabeledInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    let sse: f64 = instances
        .iter()
        .map(|i| {
            let err = ensemble.predict(&i.features) - i.label;
            err * err
        })
        .sum();
    (sse / instances.len() as f64).sqrt()
}

/// Per-feature cumulative information gain, keyed by feature name.
pub fn feature_importance(ensemble: &RegressionEnsemble) -> BTreeMap<String, f64> {
    ensemble.feature_gain.clone()
}

/// Gains aggregated by feature group; the normalized variant divides each
/// group's gain by the number of features in the group.
pub fn group_importance(ensemble: &RegressionEnsemble, normalize: bool) -> BTreeMap<String, f64> {
    let schema = FeatureSchema::get();
    let mut by_group: BTreeMap<FeatureGroup, f64> = BTreeMap::new();
    for logical in 0..schema.feature_count() {
        let gain = ensemble
            .feature_gain
            .get(schema.name(logical))
            .copied()
            .unwrap_or(0.0);
        *by_group.entry(schema.group(logical)).or_insert(0.0) += gain;
    }
    FeatureGroup::ALL
        .iter()
        .map(|g| {
            let gain = by_group.get(g).copied().unwrap_or(0.0);
            let value = if normalize {
                gain / g.cardinality() as f64
            } else {
                gain
            };
            (g.as_str().to_string(), value)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    feature_names: Vec<String>,
    /// Dense column span of each logical feature: `(name, start, width)`;
    /// width > 1 marks a one-hot-expanded categorical feature.
    onehot_map: Vec<(String, usize, usize)>,
    dense_width: usize,
    /// `None` encodes an uncalibrated model (threshold −∞).
    c_th: Option<f64>,
    ensemble: RegressionEnsemble,
}

fn schema_onehot_map() -> Vec<(String, usize, usize)> {
    let schema = FeatureSchema::get();
    (0..schema.feature_count())
        .map(|i| {
            let (start, width) = schema.span(i);
            (schema.name(i).to_string(), start, width)
        })
        .collect()
}

const MODEL_FORMAT: &str = "geoparse-selection-model-v1";

pub fn save_model(path: &Path, model: &SelectionModel) -> Result<()> {
    let schema = FeatureSchema::get();
    let record = ModelFile {
        format: MODEL_FORMAT.to_string(),
        feature_names: schema.names().map(str::to_string).collect(),
        onehot_map: schema_onehot_map(),
        dense_width: schema.dense_width(),
        c_th: if model.c_th == f64::NEG_INFINITY {
            None
        } else {
            Some(model.c_th)
        },
        ensemble: model.ensemble.clone(),
    };
    let json = serde_json::to_string_pretty(&record).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SelectionModel> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let record: ModelFile = serde_json::from_str(&src)
        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    if record.format != MODEL_FORMAT {
        return Err(Error::invalid(format!(
            "{}: unknown model format `{}`",
            path.display(),
            record.format
        )));
    }
    let schema = FeatureSchema::get();
    let names: Vec<String> = schema.names().map(str::to_string).collect();
    if record.feature_names != names
        || record.dense_width != schema.dense_width()
        || record.onehot_map != schema_onehot_map()
    {
        return Err(Error::invalid(format!(
            "{}: model feature schema does not match this build",
            path.display()
        )));
    }
    Ok(SelectionModel {
        c_th: record.c_th.unwrap_or(f64::NEG_INFINITY),
        ensemble: record.ensemble,
    })
}

/// CSV of labeled instances: `doc_id,start,end`, the 31 feature columns,
/// then `label`.
pub fn write_instances_csv(path: &Path, instances: &[LabeledInstance]) -> Result<()> {
    let schema = FeatureSchema::get();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::invalid(e.to_string()))?;
    let mut header = vec!["doc_id".to_string(), "start".to_string(), "end".to_string()];
    header.extend(schema.names().map(str::to_string));
    header.push("label".to_string());
    writer
        .write_record(&header)
        .map_err(|e| Error::invalid(e.to_string()))?;
    for inst in instances {
        let mut record = vec![
            inst.group.document_id.clone(),
            inst.group.span.0.to_string(),
            inst.group.span.1.to_string(),
        ];
        record.extend(inst.features.logical_values().iter().map(|v| v.to_string()));
        record.push(inst.label.to_string());
        writer
            .write_record(&record)
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_instances_csv(path: &Path) -> Result<Vec<LabeledInstance>> {
    let schema = FeatureSchema::get();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::invalid(e.to_string()))?;
        let expected = 3 + schema.feature_count() + 1;
        if record.len() != expected {
            return Err(Error::parse(
                path.display().to_string(),
                idx + 2,
                format!("expected {expected} columns, got {}", record.len()),
            ));
        }
        let parse_f = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| {
                Error::parse(path.display().to_string(), idx + 2, format!("bad number: {e}"))
            })
        };
        let mut values = [0.0; 31];
        for (k, value) in values.iter_mut().enumerate() {
            *value = parse_f(3 + k)?;
        }
        let features = FeatureVector::from_logical(&values);
        let label = parse_f(3 + schema.feature_count())?;
        let start: usize = record[1].parse().map_err(|_| {
            Error::parse(path.display().to_string(), idx + 2, "bad start offset")
        })?;
        let end: usize = record[2].parse().map_err(|_| {
            Error::parse(path.display().to_string(), idx + 2, "bad end offset")
        })?;
        out.push(LabeledInstance {
            features,
            label,
            group: GroupKey {
                document_id: record[0].to_string(),
                span: (start, end),
            },
        });
    }
    Ok(out)
}

/// Document-level k-fold assignment: documents are shuffled deterministically
/// and dealt round-robin, so all instances of one document share a fold.
pub fn document_folds(
    instances: &[LabeledInstance],
    k: usize,
    rng: &mut ChaCha12Rng,
) -> Vec<usize> {
    let mut docs: Vec<&str> = instances
        .iter()
        .map(|i| i.group.document_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    docs.shuffle(rng);
    let fold_of: BTreeMap<&str, usize> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| (*d, i % k))
        .collect();
    instances
        .iter()
        .map(|i| fold_of[i.group.document_id.as_str()])
        .collect()
}
