//! Command implementations. Every command returns a JSON summary object
//! that main prints to standard output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use geoparse::annotate::{annotate, build_lexicon, load_annotations, Annotation, Document};
use geoparse::embed::EmbeddingStore;
use geoparse::error::Error as CoreError;
use geoparse::expand::{
    load_expansion_table, precompute_expansions, save_expansion_table, ExpansionConfig,
    ExpansionTable, Strategy,
};
use geoparse::features::{
    context::{build_fallback_context, load_context_vectors},
    compute_features, fallback_tag, load_tags, ContextVectors, FeatureInputs, SuperclassMap,
    TagMap,
};
use geoparse::kg::{
    load_knowledge_graph, GeoPredicateConfig, KnowledgeGraph, LoadStats, OntologyMap,
};
use geoparse::pipeline::{
    evaluate, geoparse_corpus, load_dataset, load_predictions, score_document, stratified_split,
    strategy_report, write_predictions, write_trace, DatasetSplit, PipelineStores, VerticalConfig,
};
use geoparse::select::{
    calibrate_threshold, feature_importance, group_importance, label_candidates, load_model,
    random_search, rmse, save_model, train, write_instances_csv, CalibrationDoc, GroupKey,
    Hyperparameters, LabeledInstance, ParamDistributions, ScoredAnnotation, SelectionModel,
};
use geoparse::synth::{self, SynthConfig};

use crate::config::{render_config_template, RunConfig};

/// Exit codes: 2 missing input, 3 schema violation, 4 internal assertion.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn missing(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = if e.is_not_found() {
            2
        } else {
            match e {
                CoreError::Io { .. } => 2,
                CoreError::Parse { .. }
                | CoreError::Invalid(_)
                | CoreError::UnknownEntity(_)
                | CoreError::MissingVector(_) => 3,
            }
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult = Result<Value, CliError>;

/// Lazily loaded stores shared by the commands.
pub struct Workspace {
    pub config: RunConfig,
}

impl Workspace {
    pub fn new(config: RunConfig) -> Self {
        Workspace { config }
    }

    fn require(&self, path: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        match path {
            Some(p) if p.exists() => Ok(p.clone()),
            Some(p) => Err(CliError::missing(format!(
                "{what} path `{}` does not exist",
                p.display()
            ))),
            None => Err(CliError::missing(format!("{what} path not configured"))),
        }
    }

    fn geo_predicates(&self) -> Result<GeoPredicateConfig, CliError> {
        match &self.config.geo_predicates {
            Some(p) => Ok(GeoPredicateConfig::from_path(p)?),
            None => Ok(GeoPredicateConfig::default()),
        }
    }

    fn ontology(&self) -> Result<OntologyMap, CliError> {
        match &self.config.ontology {
            Some(p) => Ok(OntologyMap::from_path(p)?),
            None => Ok(OntologyMap::default()),
        }
    }

    fn superclass(&self) -> Result<SuperclassMap, CliError> {
        match &self.config.superclass {
            Some(p) => Ok(SuperclassMap::from_path(p)?),
            None => Ok(SuperclassMap::default()),
        }
    }

    fn load_kg(&self) -> Result<(KnowledgeGraph, LoadStats), CliError> {
        let path = self.require(&self.config.kg, "knowledge graph")?;
        Ok(load_knowledge_graph(&path, &self.geo_predicates()?)?)
    }

    fn load_docs(&self) -> Result<Vec<Document>, CliError> {
        let path = self.require(&self.config.dataset, "dataset")?;
        Ok(load_dataset(&path)?)
    }

    fn load_embeddings(&self) -> Result<Option<EmbeddingStore>, CliError> {
        match &self.config.embeddings {
            Some(p) => {
                if !p.exists() {
                    return Err(CliError::missing(format!(
                        "embeddings path `{}` does not exist",
                        p.display()
                    )));
                }
                Ok(Some(EmbeddingStore::load(p)?))
            }
            None => Ok(None),
        }
    }

    fn load_tags(&self) -> Result<Option<TagMap>, CliError> {
        match &self.config.tags {
            Some(p) => Ok(Some(load_tags(p)?)),
            None => Ok(None),
        }
    }

    /// Annotations per document: an external annotation file when
    /// configured, otherwise the lexicon annotator (labels plus optional
    /// alias counts).
    fn annotations(
        &self,
        kg: &KnowledgeGraph,
        docs: &[Document],
    ) -> Result<BTreeMap<String, Vec<Annotation>>, CliError> {
        let mut by_doc: BTreeMap<String, Vec<Annotation>> =
            docs.iter().map(|d| (d.id.clone(), Vec::new())).collect();
        if let Some(path) = &self.config.annotations {
            let doc_map: BTreeMap<String, Document> =
                docs.iter().map(|d| (d.id.clone(), d.clone())).collect();
            for annotation in load_annotations(path, Some(&doc_map))? {
                by_doc
                    .get_mut(&annotation.document_id)
                    .ok_or_else(|| {
                        CliError::schema(format!(
                            "annotation references unknown document `{}`",
                            annotation.document_id
                        ))
                    })?
                    .push(annotation);
            }
        } else {
            let lexicon = build_lexicon(kg, self.config.aliases.as_deref())?;
            for doc in docs {
                by_doc.insert(doc.id.clone(), annotate(doc, &lexicon));
            }
        }
        Ok(by_doc)
    }

    fn context(
        &self,
        kg: &KnowledgeGraph,
        docs: &[Document],
        annotations: &BTreeMap<String, Vec<Annotation>>,
    ) -> Result<ContextVectors, CliError> {
        match &self.config.anchor_vectors {
            Some(p) => Ok(load_context_vectors(
                p,
                self.config.abstract_vectors.as_deref(),
            )?),
            None => {
                let all: Vec<Annotation> = annotations.values().flatten().cloned().collect();
                Ok(build_fallback_context(docs, &all, kg))
            }
        }
    }

    fn expansion_config(&self) -> Result<ExpansionConfig, CliError> {
        Ok(ExpansionConfig::new(
            self.config.strategy,
            self.config.size_l.max(1),
            self.config.max_hops,
        )?)
    }

    /// The expansion table: loaded from the cache when present (checksum
    /// validated), recomputed in memory otherwise.
    fn table(
        &self,
        kg: &KnowledgeGraph,
        embeddings: Option<&EmbeddingStore>,
    ) -> Result<ExpansionTable, CliError> {
        if let Some(cache) = &self.config.cache {
            if cache.exists() {
                let table = load_expansion_table(cache)?;
                if !table.matches_graph(kg) {
                    return Err(CliError::schema(format!(
                        "expansion cache `{}` was built for a different knowledge graph",
                        cache.display()
                    )));
                }
                if table.config.size_l < self.config.size_l {
                    return Err(CliError::schema(format!(
                        "expansion cache holds L={} but the run needs L={}",
                        table.config.size_l, self.config.size_l
                    )));
                }
                return Ok(table);
            }
        }
        Ok(precompute_expansions(kg, &self.expansion_config()?, embeddings)?)
    }

    fn split(&self, docs: &[Document]) -> Result<DatasetSplit, CliError> {
        Ok(stratified_split(
            docs,
            self.config.split_fractions,
            self.config.seed,
        )?)
    }

    fn model(&self) -> Result<SelectionModel, CliError> {
        let path = self.require(&self.config.model, "model")?;
        Ok(load_model(&path)?)
    }
}

pub fn ingest(ws: &Workspace) -> CliResult {
    let (kg, stats) = ws.load_kg()?;
    let mut summary = json!({
        "command": "ingest",
        "status": "ok",
        "entities": kg.len(),
        "geo_entities": kg.geo_len(),
        "records": stats.records,
        "geo_range_warnings": stats.geo_range_warnings,
        "kg_checksum": kg.content_checksum(),
    });
    if ws.config.dataset.is_some() {
        let docs = ws.load_docs()?;
        let locations: usize = docs.iter().map(|d| d.ground_truth.len()).sum();
        let annotations = ws.annotations(&kg, &docs)?;
        let annotation_count: usize = annotations.values().map(Vec::len).sum();
        let obj = summary.as_object_mut().expect("summary is an object");
        obj.insert("documents".into(), json!(docs.len()));
        obj.insert("locations".into(), json!(locations));
        obj.insert("annotations".into(), json!(annotation_count));
    }
    Ok(summary)
}

pub fn precompute(ws: &Workspace) -> CliResult {
    let (kg, _) = ws.load_kg()?;
    let embeddings = ws.load_embeddings()?;
    let config = ws.expansion_config()?;
    let table = precompute_expansions(&kg, &config, embeddings.as_ref())?;
    let cache = ws
        .config
        .cache
        .clone()
        .ok_or_else(|| CliError::missing("cache path not configured"))?;
    save_expansion_table(&table, &cache)?;
    Ok(json!({
        "command": "precompute",
        "status": "ok",
        "strategy": config.strategy.as_str(),
        "l": config.size_l,
        "max_hops": config.max_hops,
        "entries": table.len(),
        "kg_checksum": table.kg_checksum,
        "cache": cache.display().to_string(),
    }))
}

struct PreparedPipeline {
    kg: KnowledgeGraph,
    docs: Vec<Document>,
    annotations: BTreeMap<String, Vec<Annotation>>,
    embeddings: Option<EmbeddingStore>,
    tags: Option<TagMap>,
    context: ContextVectors,
    table: ExpansionTable,
    superclass: SuperclassMap,
    ontology: OntologyMap,
    split: DatasetSplit,
}

fn prepare(ws: &Workspace) -> Result<PreparedPipeline, CliError> {
    let (kg, _) = ws.load_kg()?;
    let docs = ws.load_docs()?;
    let annotations = ws.annotations(&kg, &docs)?;
    let embeddings = ws.load_embeddings()?;
    let tags = ws.load_tags()?;
    let context = ws.context(&kg, &docs, &annotations)?;
    let table = ws.table(&kg, embeddings.as_ref())?;
    let split = ws.split(&docs)?;
    Ok(PreparedPipeline {
        kg,
        docs,
        annotations,
        embeddings,
        tags,
        context,
        table,
        superclass: ws.superclass()?,
        ontology: ws.ontology()?,
        split,
    })
}

impl PreparedPipeline {
    fn stores<'a>(&'a self, model: &'a SelectionModel, size_l: usize, ws: &Workspace) -> PipelineStores<'a> {
        PipelineStores {
            kg: &self.kg,
            table: &self.table,
            model,
            embeddings: self.embeddings.as_ref(),
            tags: self.tags.as_ref(),
            context: Some(&self.context),
            superclass_map: &self.superclass,
            ontology_map: &self.ontology,
            size_l,
            vertical: VerticalConfig {
                enabled: ws.config.vertical,
                max_depth: ws.config.vertical_depth,
            },
        }
    }

    fn labeled_instances(&self, part: &str, ws: &Workspace) -> Vec<LabeledInstance> {
        let inputs = FeatureInputs {
            kg: &self.kg,
            embeddings: self.embeddings.as_ref(),
            context: Some(&self.context),
            superclass_map: &self.superclass,
        };
        let mut instances = Vec::new();
        for doc in self.split.select(&self.docs, part) {
            let truths: Vec<_> = doc.ground_truth.iter().map(|t| t.coordinate).collect();
            for annotation in &self.annotations[&doc.id] {
                let candidates = self.table.prefix(&annotation.start_entity, ws.config.size_l);
                if candidates.is_empty() {
                    continue;
                }
                let external = self.tags.as_ref().and_then(|m| {
                    m.get(&(
                        annotation.document_id.clone(),
                        annotation.span.0,
                        annotation.span.1,
                    ))
                });
                let fallback;
                let tag = match external {
                    Some(t) => t,
                    None => {
                        fallback = fallback_tag(doc, annotation);
                        &fallback
                    }
                };
                for (candidate, label) in
                    label_candidates(candidates, &truths, ws.config.size_l, ws.config.threshold_km)
                {
                    instances.push(LabeledInstance {
                        features: compute_features(annotation, &candidate, Some(tag), &inputs),
                        label,
                        group: GroupKey {
                            document_id: doc.id.clone(),
                            span: annotation.span,
                        },
                    });
                }
            }
        }
        instances
    }
}

pub struct TrainOptions {
    pub search: bool,
    pub n_iter: usize,
    pub k_folds: usize,
    pub export_features: Option<PathBuf>,
}

pub fn train_command(ws: &Workspace, options: &TrainOptions) -> CliResult {
    let prepared = prepare(ws)?;
    let instances = prepared.labeled_instances("train", ws);
    if instances.is_empty() {
        return Err(CliError::schema(
            "the training split produced no labeled instances",
        ));
    }
    if let Some(path) = &options.export_features {
        write_instances_csv(path, &instances)?;
    }
    let mut params: Hyperparameters = ws.config.hyperparameters;
    let mut search_summary = None;
    if options.search {
        let validation = prepared.labeled_instances("validation", ws);
        let outcome = random_search(
            &instances,
            Some(&validation),
            ws.config.algorithm,
            &ParamDistributions::default(),
            options.n_iter,
            options.k_folds,
            ws.config.seed,
        )?;
        params = outcome.best;
        search_summary = Some(json!({
            "n_iter": options.n_iter,
            "k_folds": options.k_folds,
            "best_cv_rmse": outcome.best_cv_rmse,
            "validation_rmse": outcome.validation_rmse,
        }));
    }
    let ensemble = train(&instances, ws.config.algorithm, &params, ws.config.seed)?;
    let train_rmse = rmse(&ensemble, &instances);
    let model = SelectionModel::uncalibrated(ensemble);
    let model_path = ws
        .config
        .model
        .clone()
        .ok_or_else(|| CliError::missing("model path not configured"))?;
    save_model(&model_path, &model)?;
    let mut summary = json!({
        "command": "train",
        "status": "ok",
        "algorithm": ws.config.algorithm.as_str(),
        "instances": instances.len(),
        "num_trees": model.ensemble.num_trees(),
        "train_rmse": train_rmse,
        "model": model_path.display().to_string(),
    });
    if let Some(s) = search_summary {
        summary
            .as_object_mut()
            .expect("summary is an object")
            .insert("search".into(), s);
    }
    Ok(summary)
}

pub fn calibrate(ws: &Workspace) -> CliResult {
    let prepared = prepare(ws)?;
    let mut model = ws.model()?;
    let stores = prepared.stores(&model, ws.config.size_l, ws);
    let mut calibration_docs = Vec::new();
    for doc in prepared.split.select(&prepared.docs, "validation") {
        let scored = score_document(doc, &prepared.annotations[&doc.id], &stores);
        calibration_docs.push(CalibrationDoc {
            truths: doc.ground_truth.iter().map(|t| t.coordinate).collect(),
            annotations: scored
                .into_iter()
                .map(|s| ScoredAnnotation {
                    candidates: s.scored,
                })
                .collect(),
        });
    }
    let c_th = calibrate_threshold(&calibration_docs, ws.config.threshold_km)?;
    model.c_th = c_th;
    let validation_docs = prepared.split.select(&prepared.docs, "validation");
    let stores = prepared.stores(&model, ws.config.size_l, ws);
    let (predictions, _) = geoparse_corpus(&validation_docs, &prepared.annotations, &stores);
    let owned: Vec<Document> = validation_docs.into_iter().cloned().collect();
    let report = evaluate(
        &predictions,
        &owned,
        Some(&prepared.kg),
        &prepared.ontology,
        ws.config.threshold_km,
        ws.config.granularity,
    )?;
    let model_path = ws.require(&ws.config.model, "model")?;
    save_model(&model_path, &model)?;
    Ok(json!({
        "command": "calibrate",
        "status": "ok",
        "c_th": if c_th == f64::NEG_INFINITY { Value::Null } else { json!(c_th) },
        "validation_documents": owned.len(),
        "validation_f1": report.overall.f1,
        "model": model_path.display().to_string(),
    }))
}

pub fn geoparse_command(ws: &Workspace, part: &str) -> CliResult {
    let prepared = prepare(ws)?;
    let model = ws.model()?;
    let stores = prepared.stores(&model, ws.config.size_l, ws);
    let docs = prepared.split.select(&prepared.docs, part);
    let (predictions, elapsed_per_doc) = geoparse_corpus(&docs, &prepared.annotations, &stores);
    let out = ws
        .config
        .predictions
        .clone()
        .ok_or_else(|| CliError::missing("predictions path not configured"))?;
    write_predictions(&out, &predictions)?;
    if let Some(trace_path) = &ws.config.trace {
        let mut scored = Vec::new();
        for doc in &docs {
            scored.extend(score_document(doc, &prepared.annotations[&doc.id], &stores));
        }
        write_trace(trace_path, &scored)?;
    }
    let annotation_count: usize = docs
        .iter()
        .map(|d| prepared.annotations[&d.id].len())
        .sum();
    Ok(json!({
        "command": "geoparse",
        "status": "ok",
        "part": part,
        "documents": docs.len(),
        "annotations": annotation_count,
        "predictions": predictions.len(),
        "elapsed_per_doc_secs": elapsed_per_doc,
        "predictions_path": out.display().to_string(),
    }))
}

pub fn evaluate_command(ws: &Workspace, part: &str) -> CliResult {
    let docs = ws.load_docs()?;
    let predictions_path = ws.require(&ws.config.predictions, "predictions")?;
    let predictions = load_predictions(&predictions_path)?;
    let kg = match &ws.config.kg {
        Some(_) => Some(ws.load_kg()?.0),
        None => None,
    };
    let ontology = ws.ontology()?;
    let selected: Vec<Document> = if part == "all" {
        docs
    } else {
        let split = ws.split(&docs)?;
        split.select(&docs, part).into_iter().cloned().collect()
    };
    let ids: std::collections::BTreeSet<&str> =
        selected.iter().map(|d| d.id.as_str()).collect();
    let scoped: Vec<_> = predictions
        .into_iter()
        .filter(|p| ids.contains(p.document_id.as_str()))
        .collect();
    let mut report = evaluate(
        &scoped,
        &selected,
        kg.as_ref(),
        &ontology,
        ws.config.threshold_km,
        ws.config.granularity,
    )?;
    report.elapsed_per_doc_secs = 0.0;
    let report_path = ws
        .config
        .report
        .clone()
        .ok_or_else(|| CliError::missing("report path not configured"))?;
    let report_json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::schema(e.to_string()))?;
    std::fs::write(&report_path, report_json)
        .map_err(|e| CliError::from(CoreError::io(&report_path, e)))?;
    let csv_path = report_path.with_extension("csv");
    std::fs::write(&csv_path, report.to_csv())
        .map_err(|e| CliError::from(CoreError::io(&csv_path, e)))?;
    Ok(json!({
        "command": "evaluate",
        "status": "ok",
        "part": part,
        "documents": selected.len(),
        "predictions": scoped.len(),
        "tp": report.overall.tp,
        "fp": report.overall.fp,
        "fn": report.overall.fn_,
        "precision": report.overall.precision,
        "recall": report.overall.recall,
        "f1": report.overall.f1,
        "granularity_aware": ws.config.granularity,
        "report": report_path.display().to_string(),
    }))
}

pub fn strategy_report_command(
    ws: &Workspace,
    l_values: &[usize],
    out: Option<&Path>,
) -> CliResult {
    let (kg, _) = ws.load_kg()?;
    let docs = ws.load_docs()?;
    let annotations_by_doc = ws.annotations(&kg, &docs)?;
    let annotations: Vec<Annotation> = annotations_by_doc.into_values().flatten().collect();
    let embeddings = ws.load_embeddings()?;
    let report = strategy_report(
        &kg,
        &docs,
        &annotations,
        &Strategy::ALL,
        l_values,
        ws.config.threshold_km,
        embeddings.as_ref(),
        ws.config.max_hops,
    )?;
    let csv = report.to_csv();
    let mut summary = json!({
        "command": "strategy-report",
        "status": "ok",
        "rows": report.rows.len(),
        "l_values": l_values,
    });
    if let Some(path) = out {
        std::fs::write(path, &csv).map_err(|e| CliError::from(CoreError::io(path, e)))?;
        summary
            .as_object_mut()
            .expect("summary is an object")
            .insert("out".into(), json!(path.display().to_string()));
    } else {
        summary
            .as_object_mut()
            .expect("summary is an object")
            .insert("csv".into(), json!(csv));
    }
    Ok(summary)
}

pub fn feature_importance_command(ws: &Workspace, out: Option<&Path>) -> CliResult {
    let model = ws.model()?;
    let body = json!({
        "per_feature": feature_importance(&model.ensemble),
        "per_group": group_importance(&model.ensemble, false),
        "per_group_normalized": group_importance(&model.ensemble, true),
    });
    if let Some(path) = out {
        let text =
            serde_json::to_string_pretty(&body).map_err(|e| CliError::schema(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| CliError::from(CoreError::io(path, e)))?;
    }
    Ok(json!({
        "command": "feature-importance",
        "status": "ok",
        "importance": body,
        "out": out.map(|p| p.display().to_string()),
    }))
}

pub struct SynthOptions {
    pub out: PathBuf,
    pub places: usize,
    pub countries: usize,
    pub docs: usize,
}

pub fn synth_command(ws: &Workspace, options: &SynthOptions) -> CliResult {
    let corpus = synth::generate(&SynthConfig {
        n_places: options.places,
        n_countries: options.countries,
        n_docs: options.docs,
        seed: ws.config.seed,
        ..SynthConfig::default()
    });
    std::fs::create_dir_all(&options.out)
        .map_err(|e| CliError::from(CoreError::io(&options.out, e)))?;
    synth::write_to_dir(&corpus, &options.out)?;
    let config_path = options.out.join("config.toml");
    std::fs::write(&config_path, render_config_template(true))
        .map_err(|e| CliError::from(CoreError::io(&config_path, e)))?;
    Ok(json!({
        "command": "synth",
        "status": "ok",
        "out": options.out.display().to_string(),
        "entities": corpus.kg.len(),
        "geo_entities": corpus.kg.geo_len(),
        "documents": corpus.documents.len(),
        "config": config_path.display().to_string(),
    }))
}
