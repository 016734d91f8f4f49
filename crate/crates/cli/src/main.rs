//! `geoparse` — knowledge-graph geoparsing pipeline driver.
//!
//! Every command prints a single machine-readable JSON summary to standard
//! output on success. Exit codes: 0 success, 2 missing input path, 3 input
//! schema violation, 4 internal assertion failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, CliResult, SynthOptions, TrainOptions, Workspace};
use config::{FileConfig, RunConfig};

#[derive(Parser)]
#[command(name = "geoparse", version, about = "Geoparse short texts against a knowledge-graph snapshot")]
struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = automatic). One thread gives identical results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    kg: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    aliases: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    geo_predicates: Option<PathBuf>,
    #[arg(long, global = true)]
    ontology: Option<PathBuf>,
    #[arg(long, global = true)]
    superclass: Option<PathBuf>,
    #[arg(long, global = true)]
    tags: Option<PathBuf>,
    #[arg(long, global = true)]
    anchor_vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    abstract_vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    annotations: Option<PathBuf>,
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    predictions: Option<PathBuf>,
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[arg(long, global = true)]
    trace: Option<PathBuf>,

    /// Expansion strategy: spelling, latent-semantic, topological-spe,
    /// topological-lat.
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Expansion size L (0 = no expansion, starting entity only).
    #[arg(long, global = true)]
    l: Option<usize>,
    #[arg(long, global = true)]
    max_hops: Option<u32>,
    /// Selection algorithm: gbdt, random-forest, dart.
    #[arg(long, global = true)]
    algorithm: Option<String>,
    /// True-positive distance threshold in kilometres.
    #[arg(long, global = true)]
    threshold_km: Option<f64>,
    /// Granularity-aware evaluation: matches also require equal levels.
    #[arg(long, global = true)]
    granularity: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the configured inputs, reporting counts.
    Ingest,
    /// Precompute the expansion table for the whole graph into the cache.
    Precompute,
    /// Train the selection regressor on the training split.
    Train {
        /// Randomized hyperparameter search before the final fit.
        #[arg(long)]
        search: bool,
        #[arg(long, default_value_t = 50)]
        n_iter: usize,
        #[arg(long, default_value_t = 3)]
        k_folds: usize,
        /// Also export the labeled training instances as CSV.
        #[arg(long)]
        export_features: Option<PathBuf>,
    },
    /// Calibrate the confidence threshold on the validation split.
    Calibrate,
    /// Geoparse documents and write the prediction file.
    Geoparse {
        /// Dataset part: train, validation, test or all.
        #[arg(long, default_value = "all")]
        part: String,
    },
    /// Score a prediction file against the dataset's ground truth.
    Evaluate {
        #[arg(long, default_value = "all")]
        part: String,
    },
    /// Maximum-theoretical-recall and Jaccard curves per strategy.
    StrategyReport {
        /// Comma-separated expansion sizes, e.g. `0,1,2,5,14`.
        #[arg(long, default_value = "0,1,2,5,14")]
        l_values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-feature and per-group information gain of a trained model.
    FeatureImportance {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic gazetteer corpus ready to run end to end.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 320)]
        places: usize,
        #[arg(long, default_value_t = 40)]
        countries: usize,
        #[arg(long, default_value_t = 300)]
        docs: usize,
    },
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::missing(format!("config file `{}` does not exist", path.display()))
            } else {
                CliError::missing(format!("cannot read config `{}`: {e}", path.display()))
            }
        })?;
        let file: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or_else(|| std::path::Path::new("."));
        config
            .apply_file(&file, dir)
            .map_err(CliError::schema)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    macro_rules! override_path {
        ($field:ident) => {
            if let Some(p) = &cli.$field {
                config.$field = Some(p.clone());
            }
        };
    }
    override_path!(kg);
    override_path!(dataset);
    override_path!(aliases);
    override_path!(embeddings);
    override_path!(geo_predicates);
    override_path!(ontology);
    override_path!(superclass);
    override_path!(tags);
    override_path!(anchor_vectors);
    override_path!(abstract_vectors);
    override_path!(annotations);
    override_path!(cache);
    override_path!(model);
    override_path!(predictions);
    override_path!(report);
    override_path!(trace);
    if let Some(s) = &cli.strategy {
        config.strategy = geoparse::expand::Strategy::parse(s)
            .ok_or_else(|| CliError::schema(format!("unknown strategy `{s}`")))?;
    }
    if let Some(l) = cli.l {
        config.size_l = l;
    }
    if let Some(h) = cli.max_hops {
        config.max_hops = h;
    }
    if let Some(a) = &cli.algorithm {
        config.algorithm = geoparse::select::Algorithm::parse(a)
            .ok_or_else(|| CliError::schema(format!("unknown algorithm `{a}`")))?;
    }
    if let Some(t) = cli.threshold_km {
        config.threshold_km = t;
    }
    if cli.granularity {
        config.granularity = true;
    }
    config.validate().map_err(CliError::schema)?;
    Ok(config)
}

fn parse_l_values(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| CliError::schema(format!("bad L value `{p}`")))
        })
        .collect()
}

fn run(cli: &Cli) -> CliResult {
    let config = resolve_config(cli)?;
    if config.threads > 0 {
        // Ignore the error when a pool already exists (tests call run twice).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build_global();
    }
    let ws = Workspace::new(config);
    match &cli.command {
        Command::Ingest => commands::ingest(&ws),
        Command::Precompute => commands::precompute(&ws),
        Command::Train {
            search,
            n_iter,
            k_folds,
            export_features,
        } => commands::train_command(
            &ws,
            &TrainOptions {
                search: *search,
                n_iter: *n_iter,
                k_folds: *k_folds,
                export_features: export_features.clone(),
            },
        ),
        Command::Calibrate => commands::calibrate(&ws),
        Command::Geoparse { part } => commands::geoparse_command(&ws, part),
        Command::Evaluate { part } => commands::evaluate_command(&ws, part),
        Command::StrategyReport { l_values, out } => {
            let ls = parse_l_values(l_values)?;
            commands::strategy_report_command(&ws, &ls, out.as_deref())
        }
        Command::FeatureImportance { out } => {
            commands::feature_importance_command(&ws, out.as_deref())
        }
        Command::Synth {
            out,
            places,
            countries,
            docs,
        } => commands::synth_command(
            &ws,
            &SynthOptions {
                out: out.clone(),
                places: *places,
                countries: *countries,
                docs: *docs,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&cli)));
    match outcome {
        Ok(Ok(summary)) => {
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal assertion failed".to_string());
            eprintln!("internal assertion: {message}");
            ExitCode::from(4)
        }
    }
}
