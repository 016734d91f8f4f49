//! Run configuration: TOML file merged with command-line overrides
//! (flags win). Optional paths use the empty string as "unset".

use std::path::{Path, PathBuf};

use serde::Deserialize;

use geoparse::expand::Strategy;
use geoparse::select::{Algorithm, Hyperparameters};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub paths: PathsSection,
    pub expansion: ExpansionSection,
    pub selection: SelectionSection,
    pub evaluation: EvaluationSection,
    pub split: SplitSection,
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub kg: Option<String>,
    pub dataset: Option<String>,
    pub aliases: Option<String>,
    pub embeddings: Option<String>,
    pub geo_predicates: Option<String>,
    pub ontology: Option<String>,
    pub superclass: Option<String>,
    pub tags: Option<String>,
    pub anchor_vectors: Option<String>,
    pub abstract_vectors: Option<String>,
    pub annotations: Option<String>,
    pub cache: Option<String>,
    pub model: Option<String>,
    pub predictions: Option<String>,
    pub report: Option<String>,
    pub trace: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSection {
    pub strategy: Option<String>,
    pub l: Option<usize>,
    pub max_hops: Option<u32>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub algorithm: Option<String>,
    pub num_trees: Option<usize>,
    pub max_leaves: Option<usize>,
    pub max_depth: Option<usize>,
    pub learning_rate: Option<f64>,
    pub min_samples_leaf: Option<usize>,
    pub feature_subsample: Option<f64>,
    pub row_subsample: Option<f64>,
    pub dart_drop_rate: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub threshold_km: Option<f64>,
    pub granularity: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train: Option<f64>,
    pub validation: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub vertical: Option<bool>,
    pub vertical_depth: Option<u32>,
}

/// Fully resolved configuration. Defaults reproduce the pipeline's best
/// known configuration: topological-spe expansion at L=14, GBDT selection,
/// a 50 km matching threshold and a 64/16/20 document split.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub kg: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub geo_predicates: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub superclass: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub anchor_vectors: Option<PathBuf>,
    pub abstract_vectors: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub strategy: Strategy,
    pub size_l: usize,
    pub max_hops: u32,
    pub algorithm: Algorithm,
    pub hyperparameters: Hyperparameters,
    pub threshold_km: f64,
    pub granularity: bool,
    pub split_fractions: (f64, f64, f64),
    pub vertical: bool,
    pub vertical_depth: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            threads: 0,
            kg: None,
            dataset: None,
            aliases: None,
            embeddings: None,
            geo_predicates: None,
            ontology: None,
            superclass: None,
            tags: None,
            anchor_vectors: None,
            abstract_vectors: None,
            annotations: None,
            cache: None,
            model: None,
            predictions: None,
            report: None,
            trace: None,
            strategy: Strategy::TopologicalSpe,
            size_l: 14,
            max_hops: 6,
            algorithm: Algorithm::Gbdt,
            hyperparameters: Hyperparameters::default(),
            threshold_km: 50.0,
            granularity: false,
            split_fractions: (0.64, 0.16, 0.20),
            vertical: true,
            vertical_depth: 3,
        }
    }
}

fn path_of(base: &Path, value: &Option<String>) -> Option<PathBuf> {
    match value.as_deref() {
        None | Some("") => None,
        Some(p) => {
            let p = PathBuf::from(p);
            Some(if p.is_absolute() { p } else { base.join(p) })
        }
    }
}

impl RunConfig {
    /// Applies a parsed config file on top of the defaults. Relative paths
    /// resolve against the config file's directory.
    pub fn apply_file(&mut self, file: &FileConfig, config_dir: &Path) -> Result<(), String> {
        if let Some(seed) = file.seed {
            self.seed = seed;
        }
        if let Some(threads) = file.threads {
            self.threads = threads;
        }
        let p = &file.paths;
        macro_rules! set_path {
            ($field:ident) => {
                if let Some(v) = path_of(config_dir, &p.$field) {
                    self.$field = Some(v);
                }
            };
        }
        set_path!(kg);
        set_path!(dataset);
        set_path!(aliases);
        set_path!(embeddings);
        set_path!(geo_predicates);
        set_path!(ontology);
        set_path!(superclass);
        set_path!(tags);
        set_path!(anchor_vectors);
        set_path!(abstract_vectors);
        set_path!(annotations);
        set_path!(cache);
        set_path!(model);
        set_path!(predictions);
        set_path!(report);
        set_path!(trace);
        if let Some(s) = &file.expansion.strategy {
            self.strategy =
                Strategy::parse(s).ok_or_else(|| format!("unknown strategy `{s}`"))?;
        }
        if let Some(l) = file.expansion.l {
            self.size_l = l;
        }
        if let Some(h) = file.expansion.max_hops {
            self.max_hops = h;
        }
        if let Some(a) = &file.selection.algorithm {
            self.algorithm =
                Algorithm::parse(a).ok_or_else(|| format!("unknown algorithm `{a}`"))?;
        }
        let s = &file.selection;
        let hp = &mut self.hyperparameters;
        if let Some(v) = s.num_trees {
            hp.num_trees = v;
        }
        if let Some(v) = s.max_leaves {
            hp.max_leaves = v;
        }
        if let Some(v) = s.max_depth {
            hp.max_depth = v;
        }
        if let Some(v) = s.learning_rate {
            hp.learning_rate = v;
        }
        if let Some(v) = s.min_samples_leaf {
            hp.min_samples_leaf = v;
        }
        if let Some(v) = s.feature_subsample {
            hp.feature_subsample = v;
        }
        if let Some(v) = s.row_subsample {
            hp.row_subsample = v;
        }
        if let Some(v) = s.dart_drop_rate {
            hp.dart_drop_rate = v;
        }
        if let Some(t) = file.evaluation.threshold_km {
            self.threshold_km = t;
        }
        if let Some(g) = file.evaluation.granularity {
            self.granularity = g;
        }
        let (mut a, mut b, mut c) = self.split_fractions;
        if let Some(v) = file.split.train {
            a = v;
        }
        if let Some(v) = file.split.validation {
            b = v;
        }
        if let Some(v) = file.split.test {
            c = v;
        }
        self.split_fractions = (a, b, c);
        if let Some(v) = file.pipeline.vertical {
            self.vertical = v;
        }
        if let Some(v) = file.pipeline.vertical_depth {
            self.vertical_depth = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.threshold_km <= 0.0 {
            return Err("threshold_km must be positive".into());
        }
        if self.max_hops == 0 {
            return Err("max_hops must be at least 1".into());
        }
        let (a, b, c) = self.split_fractions;
        if (a + b + c - 1.0).abs() > 1e-9 {
            return Err("split fractions must sum to 1".into());
        }
        Ok(())
    }
}

/// Writes a ready-to-edit config with every key present.
pub fn render_config_template(dir_relative: bool) -> String {
    let prefix = if dir_relative { "" } else { "./" };
    format!(
        r#"seed = 42
threads = 0

[paths]
kg = "{prefix}kg.tsv"
dataset = "{prefix}dataset.jsonl"
aliases = "{prefix}aliases.tsv"
embeddings = "{prefix}vectors.tsv"
geo_predicates = ""
ontology = ""
superclass = ""
tags = ""
anchor_vectors = ""
abstract_vectors = ""
annotations = ""
cache = "{prefix}expansions.cache"
model = "{prefix}model.json"
predictions = "{prefix}predictions.jsonl"
report = "{prefix}report.json"
trace = ""

[expansion]
strategy = "topological-spe"
l = 14
max_hops = 6

[selection]
algorithm = "gbdt"
num_trees = 200
max_leaves = 31
max_depth = 8
learning_rate = 0.1
min_samples_leaf = 5
feature_subsample = 0.8
row_subsample = 0.8
dart_drop_rate = 0.1

[evaluation]
threshold_km = 50.0
granularity = false

[split]
train = 0.64
validation = 0.16
test = 0.20

[pipeline]
vertical = true
vertical_depth = 3
"#
    )
}
