//! Run configuration: a TOML file whose values command-line flags override.
//! Defaults match the published setup where one exists.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use germeval_core::baseline::PoolHead;
use germeval_core::ensemble::{ThresholdMode, GRID_STEP};
use germeval_core::{Criterion, Schema, TrainConfig};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 2021;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for every stochastic stage.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub schema: Schema,
    pub preprocess: PreprocessSection,
    pub split: SplitSection,
    pub pool: PoolSection,
    pub train: Option<TrainConfig>,
    pub ensemble: EnsembleSection,
    pub bootstrap: BootstrapSection,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub folds: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    /// Base directory for run directories (default `runs`).
    pub runs: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub max_tokens: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub k: Option<usize>,
    pub fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSection {
    pub count: Option<usize>,
    pub head: Option<PoolHead>,
    pub family: Option<String>,
    pub keep_models: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub grid_step: Option<f64>,
    /// `macro`, `per-class` or `fixed:<t>`.
    pub thresholds: Option<String>,
    pub families: Option<Vec<String>>,
    pub slots: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub sizes: Option<Vec<usize>>,
    pub samples_per_size: Option<usize>,
    pub compositions: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&raw).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    pub fn train(&self) -> TrainConfig {
        self.train.clone().unwrap_or_default()
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.paths.runs.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }
}

/// Threshold mode from its command-line spelling.
pub fn parse_thresholds(spec: &str) -> Result<ThresholdMode> {
    match spec.trim() {
        "macro" => Ok(ThresholdMode::Calibrated(Criterion::Macro)),
        "per-class" => Ok(ThresholdMode::Calibrated(Criterion::PerClass)),
        other => match other.strip_prefix("fixed:") {
            Some(v) => {
                let t: f64 = v.parse().with_context(|| format!("bad fixed threshold `{v}`"))?;
                if !(0.0..=1.0).contains(&t) {
                    bail!("fixed threshold {t} outside [0, 1]");
                }
                Ok(ThresholdMode::Fixed(t))
            }
            None => bail!("unknown threshold mode `{other}` (expected macro, per-class or fixed:<t>)"),
        },
    }
}

pub fn ensemble_options(
    config: &EnsembleSection,
    thresholds: Option<&str>,
    grid_step: Option<f64>,
) -> Result<germeval_core::ensemble::EnsembleOptions> {
    let mode = match thresholds.or(config.thresholds.as_deref()) {
        Some(s) => parse_thresholds(s)?,
        None => ThresholdMode::Calibrated(Criterion::Macro),
    };
    Ok(germeval_core::ensemble::EnsembleOptions {
        grid_step: grid_step.or(config.grid_step).unwrap_or(GRID_STEP),
        thresholds: mode,
    })
}

/// Parses `1,2,5` or `default`.
pub fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    if spec.trim() == "default" {
        return Ok(germeval_core::bootstrap::default_sizes());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad ensemble size `{s}`")))
        .collect()
}

/// What the schema flags can override.
#[derive(Clone, Debug, Default, clap::Args, Serialize)]
pub struct SchemaFlags {
    /// Name of the text column.
    #[arg(long)]
    pub text_column: Option<String>,
    /// Name of the comment id column.
    #[arg(long)]
    pub id_column: Option<String>,
    /// Names of the toxic, engaging and fact-claiming columns, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub label_columns: Option<Vec<String>>,
    #[arg(long)]
    pub delimiter: Option<char>,
}

impl SchemaFlags {
    pub fn resolve(&self, base: &Schema) -> Schema {
        let mut s = base.clone();
        if let Some(t) = &self.text_column {
            s.text = t.clone();
        }
        if let Some(i) = &self.id_column {
            s.id = i.clone();
        }
        if let Some(l) = &self.label_columns {
            s.toxic = l[0].clone();
            s.engaging = l[1].clone();
            s.fact = l[2].clone();
        }
        if let Some(d) = self.delimiter {
            s.delimiter = d;
        }
        s
    }
}
