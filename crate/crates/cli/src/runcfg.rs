//! Resolution of the `run` command configuration: a flat key=value config
//! file overridden by command-line flags, expanded into the grid of
//! experiment configs.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use alpool_core::acquisition::{strategy_names, Strategy};
use alpool_core::engine::{default_seed_size, ExperimentConfig, PrepareParams};
use alpool_core::models::{ModelKind, MODEL_NAMES};

use crate::RunArgs;

pub struct Resolved {
    pub corpus: PathBuf,
    pub outdir: PathBuf,
    pub jobs: usize,
    pub prepare: PrepareParams,
    pub configs: Vec<ExperimentConfig>,
}

pub enum ResolveError {
    /// Bad flag/config values: exit 2.
    Usage(String),
    /// Missing or unreadable files: exit 1.
    Runtime(String),
}

/// Recognized config-file keys. Anything else is a usage error.
const CONFIG_KEYS: &[&str] = &[
    "corpus", "outdir", "strategies", "models", "seeds", "iterations", "batch", "topk", "jobs",
    "threshold", "train_fraction", "validation_fraction", "split_seed", "max_features",
];

fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>, ResolveError> {
    let content = fs::read_to_string(path)
        .map_err(|e| ResolveError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ResolveError::Usage(format!(
                "config line {}: expected key=value, got `{line}`",
                idx + 1
            )));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(ResolveError::Usage(format!(
                "config line {}: unknown key `{key}` (known: {})",
                idx + 1,
                CONFIG_KEYS.join(", ")
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, ResolveError> {
    value
        .parse()
        .map_err(|_| ResolveError::Usage(format!("invalid {what}: `{value}`")))
}

pub fn resolve(args: &RunArgs) -> Result<Resolved, ResolveError> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let from_file = |key: &str| file.get(key).cloned();

    let corpus: PathBuf = match args.corpus.clone().or_else(|| from_file("corpus").map(Into::into)) {
        Some(p) => p,
        None => return Err(ResolveError::Usage("no corpus given (flag --corpus or config key corpus)".into())),
    };
    let outdir: PathBuf = match args.outdir.clone().or_else(|| from_file("outdir").map(Into::into)) {
        Some(p) => p,
        None => return Err(ResolveError::Usage("no output directory given (flag --outdir or config key outdir)".into())),
    };

    let strategies_raw = args
        .strategies
        .clone()
        .or_else(|| from_file("strategies"))
        .unwrap_or_else(|| "random".to_string());
    let models_raw = args
        .models
        .clone()
        .or_else(|| from_file("models"))
        .unwrap_or_else(|| "lr".to_string());
    let seeds_raw = args
        .seeds
        .clone()
        .or_else(|| from_file("seeds"))
        .unwrap_or_else(|| "0".to_string());

    let mut strategies = Vec::new();
    for name in strategies_raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match Strategy::parse(name) {
            Ok(s) => strategies.push(s),
            Err(_) => {
                return Err(ResolveError::Usage(format!(
                    "unknown strategy `{name}`; accepted: {}",
                    strategy_names().join(", ")
                )))
            }
        }
    }
    let mut models = Vec::new();
    for name in models_raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match ModelKind::parse(name) {
            Ok(m) => models.push(m),
            Err(_) => {
                return Err(ResolveError::Usage(format!(
                    "unknown model `{name}`; accepted: {}",
                    MODEL_NAMES.join(", ")
                )))
            }
        }
    }
    let mut seeds = Vec::new();
    for value in seeds_raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        seeds.push(parse::<u64>(value, "seed")?);
    }
    if strategies.is_empty() || models.is_empty() || seeds.is_empty() {
        return Err(ResolveError::Usage("empty strategy, model, or seed list".into()));
    }

    let iterations: usize = match args.iterations {
        Some(v) => v,
        None => match from_file("iterations") {
            Some(v) => parse(&v, "iterations")?,
            None => 300,
        },
    };
    let batch: usize = match args.batch {
        Some(v) => v,
        None => match from_file("batch") {
            Some(v) => parse(&v, "batch")?,
            None => 10,
        },
    };
    let topk: usize = match args.topk {
        Some(v) => v,
        None => match from_file("topk") {
            Some(v) => parse(&v, "topk")?,
            None => 10,
        },
    };
    let jobs: usize = match args.jobs {
        Some(v) => v,
        None => match from_file("jobs") {
            Some(v) => parse(&v, "jobs")?,
            None => 1,
        },
    };
    if iterations == 0 || batch == 0 || topk == 0 || jobs == 0 {
        return Err(ResolveError::Usage(
            "iterations, batch, topk, and jobs must be positive".into(),
        ));
    }
    let threshold: f64 = match from_file("threshold") {
        Some(v) => parse(&v, "threshold")?,
        None => 0.5,
    };
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(ResolveError::Usage(format!("threshold {threshold} outside (0, 1)")));
    }

    let mut prepare = PrepareParams { top_k: topk, ..Default::default() };
    if let Some(v) = from_file("train_fraction") {
        prepare.train_fraction = parse(&v, "train_fraction")?;
    }
    if let Some(v) = from_file("validation_fraction") {
        prepare.validation_fraction = parse(&v, "validation_fraction")?;
    }
    if let Some(v) = from_file("split_seed") {
        prepare.split_seed = parse(&v, "split_seed")?;
    }
    if let Some(v) = from_file("max_features") {
        prepare.max_features = parse(&v, "max_features")?;
    }

    let mut configs = Vec::new();
    for strategy in &strategies {
        for model in &models {
            for &seed in &seeds {
                let mut config = ExperimentConfig::new(*strategy, model.clone(), seed);
                config.batch_size = batch;
                config.max_iterations = iterations;
                config.threshold = threshold;
                config.seed_size = default_seed_size(model);
                configs.push(config);
            }
        }
    }
    Ok(Resolved { corpus, outdir, jobs, prepare, configs })
}
