//! Training many baseline models per fold and persisting their probabilities.
//!
//! Members of one fold differ in their weight initialization and in the
//! early-stopping subset they hold out of the fold's training portion.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::model::{Example, HeadKind, LinearModel};
use super::train::{train, TrainConfig};
use crate::corpus::{Dataset, FoldPlan};
use crate::table::{read_tables, write_tables, Layout, ProbabilityTable};
use crate::{seed, Error, Result, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolHead {
    MultiLabel,
    /// One binary model per task, i.e. three models per slot.
    SingleLabel,
}

impl PoolHead {
    fn heads(self) -> Vec<HeadKind> {
        match self {
            PoolHead::MultiLabel => vec![HeadKind::MultiLabel],
            PoolHead::SingleLabel => Task::ALL.iter().map(|&t| HeadKind::SingleLabel(t)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolConfig {
    /// Models per fold (per task for single-label pools).
    pub count: usize,
    pub head: PoolHead,
    pub family: String,
    pub seed: u64,
    pub train: TrainConfig,
    /// Keep the trained models in memory (and write snapshots on save).
    pub keep_models: bool,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            count: 30,
            head: PoolHead::MultiLabel,
            family: "linear".into(),
            seed: 42,
            train: TrainConfig::default(),
            keep_models: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolMember {
    pub id: String,
    /// Model family, used to build ensembles of a given composition.
    pub family: String,
    pub layout: Layout,
    /// Validation fold, or `None` for models trained on all data.
    pub fold: Option<usize>,
    pub slot: usize,
    pub seed: u64,
    pub best_update: usize,
    pub best_score: f64,
    /// Predictions on the validation fold (empty without a fold).
    #[serde(skip)]
    pub valid: ProbabilityTable,
    /// Predictions on the member's own early-stopping subset.
    #[serde(skip)]
    pub early_stop: ProbabilityTable,
    #[serde(skip)]
    pub model: Option<LinearModel>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pool {
    pub members: Vec<PoolMember>,
}

impl Default for ProbabilityTable {
    fn default() -> Self {
        ProbabilityTable::new("", Layout::MultiLabel)
    }
}

pub fn member_id(family: &str, head: HeadKind, fold: Option<usize>, slot: usize) -> String {
    let fold = fold.map_or_else(|| "all".to_owned(), |f| format!("f{f}"));
    match head {
        HeadKind::MultiLabel => format!("{family}-ml-{fold}-{slot:03}"),
        HeadKind::SingleLabel(t) => format!("{family}-sl-{t}-{fold}-{slot:03}"),
    }
}

struct Job {
    fold: Option<usize>,
    head: HeadKind,
    slot: usize,
}

/// Trains `config.count` models per fold of `plan` (or on all of `dataset`
/// when `plan` is `None`).
///
/// Each member draws its early-stopping subset, `round(fraction · n)` of the
/// `n` available training samples, with its own seed; the rest is used for
/// training. Output order and content do not depend on thread scheduling.
pub fn train_pool(dataset: &Dataset, plan: Option<&FoldPlan>, fraction: f64, config: &PoolConfig) -> Result<Pool> {
    config.train.validate()?;
    if config.count == 0 {
        return Err(Error::config("pool size must be at least 1"));
    }
    if !dataset.is_labeled() {
        return Err(Error::config("training data must be labeled"));
    }
    if let Some(plan) = plan {
        plan.validate()?;
        if plan.size != dataset.len() {
            return Err(Error::LengthMismatch {
                what: "fold plan and dataset sizes",
                left: plan.size,
                right: dataset.len(),
            });
        }
    }
    let fraction = plan.map_or(fraction, |p| p.fraction);
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config("early-stop fraction must lie in (0, 1)"));
    }

    let features: Vec<FeatureVector> = dataset
        .comments
        .par_iter()
        .map(|c| config.train.features.featurize(&c.text))
        .collect();
    let examples: Vec<Example> = features
        .iter()
        .zip(&dataset.comments)
        .map(|(features, c)| Example {
            features,
            labels: c.labels.expect("checked labeled"),
        })
        .collect();

    let folds: Vec<Option<usize>> = match plan {
        Some(p) => (0..p.k).map(Some).collect(),
        None => vec![None],
    };
    let mut jobs = Vec::new();
    for &fold in &folds {
        for head in config.head.heads() {
            for slot in 0..config.count {
                jobs.push(Job { fold, head, slot });
            }
        }
    }

    let members = jobs
        .par_iter()
        .map(|job| {
            let task_key = match job.head {
                HeadKind::MultiLabel => 3,
                HeadKind::SingleLabel(t) => t.index() as u64,
            };
            let fold_key = job.fold.map_or(u64::MAX, |f| f as u64);
            let member_seed = seed::derive(config.seed, &[fold_key, task_key, job.slot as u64]);

            let (mut available, validation) = match (plan, job.fold) {
                (Some(p), Some(f)) => (p.training(f), p.folds[f].clone()),
                _ => ((0..dataset.len()).collect(), Vec::new()),
            };
            available.shuffle(&mut seed::stream(member_seed, &[0xe5]));
            let n_es = crate::corpus::early_stop_size(fraction, available.len());
            let (es_idx, train_idx) = available.split_at(n_es);
            let mut es_idx = es_idx.to_vec();
            es_idx.sort_unstable();
            let mut train_idx = train_idx.to_vec();
            train_idx.sort_unstable();

            let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i]).collect::<Vec<_>>();
            let (model, log) = train(&pick(&train_idx), &pick(&es_idx), &config.train, job.head, member_seed)?;

            let id = member_id(&config.family, job.head, job.fold, job.slot);
            let rows = |idx: &[usize]| {
                idx.iter()
                    .map(|&i| (dataset.comments[i].id, &features[i]))
                    .collect::<Vec<_>>()
            };
            let valid = model.predict_proba(&id, rows(&validation));
            let early_stop = model.predict_proba(&id, rows(&es_idx));
            Ok(PoolMember {
                id,
                family: config.family.clone(),
                layout: job.head.layout(),
                fold: job.fold,
                slot: job.slot,
                seed: member_seed,
                best_update: log.best_update,
                best_score: log.best_score,
                valid,
                early_stop,
                model: config.keep_models.then_some(model),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Pool { members })
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    #[serde(flatten)]
    member: PoolMember,
    valid_table: PathBuf,
    early_stop_table: PathBuf,
    model: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    members: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "pool.json";

/// A member's table file; a header-only file is an empty table (members
/// trained on all data have no validation predictions).
fn member_table(path: &Path, member: &PoolMember) -> Result<ProbabilityTable> {
    let mut tables = read_tables(path)?;
    match tables.len() {
        0 => Ok(ProbabilityTable::new(member.id.clone(), member.layout)),
        1 if tables[0].model_id == member.id => Ok(tables.pop().unwrap()),
        _ => Err(Error::config(format!(
            "{} should hold predictions of `{}` only",
            path.display(),
            member.id
        ))),
    }
}

impl Pool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Adds the members of another pool, e.g. a second model family.
    pub fn extend(&mut self, other: Pool) -> Result<()> {
        for m in other.members {
            if self.members.iter().any(|x| x.id == m.id) {
                return Err(Error::config(format!("duplicate pool member `{}`", m.id)));
            }
            self.members.push(m);
        }
        Ok(())
    }

    /// Writes `pool.json` plus one table file per member and split (and model
    /// snapshots for members that kept their model).
    pub fn save(&self, dir: &Path) -> Result<()> {
        let tables = dir.join("tables");
        fs::create_dir_all(&tables).map_err(|e| Error::io(&tables, e))?;
        let mut entries = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let valid_table = PathBuf::from("tables").join(format!("{}.valid.csv", m.id));
            let early_stop_table = PathBuf::from("tables").join(format!("{}.early-stop.csv", m.id));
            write_tables(&dir.join(&valid_table), &[&m.valid])?;
            write_tables(&dir.join(&early_stop_table), &[&m.early_stop])?;
            let model = match &m.model {
                Some(model) => {
                    let models = dir.join("models");
                    fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
                    let rel = PathBuf::from("models").join(format!("{}.bin", m.id));
                    model.save(&dir.join(&rel))?;
                    Some(rel)
                }
                None => None,
            };
            entries.push(ManifestEntry {
                member: m.clone(),
                valid_table,
                early_stop_table,
                model,
            });
        }
        let path = dir.join(MANIFEST);
        let json = serde_json::to_string_pretty(&Manifest { members: entries })?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Reads a pool directory. Table paths in the manifest are relative to
    /// the directory; model snapshots are loaded when present.
    pub fn load(dir: &Path) -> Result<Pool> {
        let path = dir.join(MANIFEST);
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&raw)?;
        let mut members = Vec::with_capacity(manifest.members.len());
        for entry in manifest.members {
            let mut m = entry.member;
            m.valid = member_table(&dir.join(&entry.valid_table), &m)?;
            m.early_stop = member_table(&dir.join(&entry.early_stop_table), &m)?;
            for t in [&m.valid, &m.early_stop] {
                if t.layout != m.layout && !t.is_empty() {
                    return Err(Error::config(format!(
                        "member `{}`: table layout {} does not match manifest {}",
                        m.id, t.layout, m.layout
                    )));
                }
            }
            m.valid.layout = m.layout;
            m.early_stop.layout = m.layout;
            if let Some(rel) = entry.model {
                m.model = Some(LinearModel::load(&dir.join(rel))?);
            }
            members.push(m);
        }
        Ok(Pool { members })
    }
}
