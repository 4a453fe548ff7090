//! Ensemble-size experiments: ensembles are drawn with replacement from a
//! trained pool, scored on every validation fold, and the fold-averaged
//! macro-F1 is summarized per ensemble size.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{Pool, PoolMember};
use crate::ensemble::{
    argmax, criterion_curves, grid_points, mean_columns, threshold_curve, Criterion,
    EnsembleOptions, ThresholdMode,
};
use crate::metrics::{mean_std, ConfusionMatrix, EvalReport};
use crate::table::{Layout, ProbabilityTable};
use crate::{seed, Error, LabelSet, Result, Task};

/// Shares of model families in every drawn ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub name: String,
    /// `(family, weight)`; an empty list draws from the whole pool.
    pub parts: Vec<(String, f64)>,
}

impl Default for Composition {
    fn default() -> Self {
        Composition {
            name: "all".into(),
            parts: Vec::new(),
        }
    }
}

impl Composition {
    /// Parses `name=family:weight,family:weight`, `family:weight,...` or a
    /// bare family name. `all` selects the whole pool.
    pub fn parse(spec: &str) -> Result<Composition> {
        let (name, body) = match spec.split_once('=') {
            Some((n, b)) => (n.trim().to_owned(), b),
            None => (spec.trim().to_owned(), spec),
        };
        if body.trim() == "all" {
            return Ok(Composition { name, parts: Vec::new() });
        }
        let mut parts = Vec::new();
        for item in body.split(',') {
            let (family, weight) = match item.split_once(':') {
                Some((f, w)) => (
                    f.trim(),
                    w.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(format!("bad weight in composition `{spec}`")))?,
                ),
                None => (item.trim(), 1.0),
            };
            if family.is_empty() || weight.is_nan() || weight <= 0.0 {
                return Err(Error::config(format!("bad composition `{spec}`")));
            }
            parts.push((family.to_owned(), weight));
        }
        Ok(Composition { name, parts })
    }

    /// Members per part for an ensemble of `size`, by largest remainder.
    /// Ties go to the earlier part.
    pub fn allocate(&self, size: usize) -> Vec<usize> {
        if self.parts.is_empty() {
            return vec![size];
        }
        let total: f64 = self.parts.iter().map(|p| p.1).sum();
        let exact: Vec<f64> = self.parts.iter().map(|p| p.1 / total * size as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        let short = size - counts.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        counts
    }

    fn admits(&self, part: usize, member: &PoolMember) -> bool {
        self.parts.is_empty() || self.parts[part].0 == member.family
    }

    fn part_count(&self) -> usize {
        self.parts.len().max(1)
    }
}

/// Default ensemble sizes: every size up to 50, then steps of 10 up to 200.
pub fn default_sizes() -> Vec<usize> {
    (1..=50).chain((60..=200).step_by(10)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub sizes: Vec<usize>,
    pub samples_per_size: usize,
    pub seed: u64,
    pub composition: Composition,
    pub ensemble: EnsembleOptions,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            sizes: default_sizes(),
            samples_per_size: 1000,
            seed: 7,
            composition: Composition::default(),
            ensemble: EnsembleOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeResult {
    pub size: usize,
    pub mean: f64,
    pub std: f64,
    /// Fold-averaged macro-F1 of every draw, in draw order.
    pub samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub composition: Composition,
    pub seed: u64,
    pub samples_per_size: usize,
    pub pool: Vec<String>,
    pub sizes: Vec<SizeResult>,
}

/// Task groups drawn independently: one for multi-label pools, one per task
/// for single-label pools.
fn groups(layout: Layout) -> Vec<Layout> {
    match layout {
        Layout::MultiLabel => vec![Layout::MultiLabel],
        Layout::SingleLabel(_) => Task::ALL.iter().map(|&t| Layout::SingleLabel(t)).collect(),
    }
}

/// A member's validation predictions in the fold's reference order, plus
/// its threshold curves on its early-stopping subset.
struct Prepared<'a> {
    member: &'a PoolMember,
    valid: Vec<f64>,
    curves: Option<[Vec<f64>; 3]>,
}

struct FoldData<'a> {
    reference: &'a ProbabilityTable,
    gold: Vec<LabelSet>,
    /// `[part][group]` candidate lists.
    candidates: Vec<Vec<Vec<Prepared<'a>>>>,
}

/// Pool members indexed by fold, composition part and task group, with the
/// per-member work of the bootstrap done once up front.
pub struct PreparedPool<'a> {
    folds: Vec<FoldData<'a>>,
    layout: Layout,
    grid: Vec<f64>,
    gold: &'a HashMap<u64, LabelSet>,
}

impl<'a> PreparedPool<'a> {
    pub fn new(
        pool: &'a Pool,
        gold: &'a HashMap<u64, LabelSet>,
        composition: &Composition,
        options: &EnsembleOptions,
    ) -> Result<PreparedPool<'a>> {
        let first = pool
            .members
            .iter()
            .find(|m| m.fold.is_some())
            .ok_or_else(|| Error::config("bootstrap needs a pool with cross-validation members"))?;
        let layout = first.layout;
        if pool.members.iter().any(|m| groups(m.layout) != groups(layout)) {
            return Err(Error::config("cannot mix single-label and multi-label members"));
        }
        let grid = grid_points(options.grid_step)?;
        let mut fold_ids: Vec<usize> = pool.members.iter().filter_map(|m| m.fold).collect();
        fold_ids.sort_unstable();
        fold_ids.dedup();

        let macro_curves = layout == Layout::MultiLabel
            && options.thresholds == ThresholdMode::Calibrated(Criterion::Macro);

        let mut folds = Vec::new();
        for f in fold_ids {
            let in_fold: Vec<&PoolMember> = pool.members.iter().filter(|m| m.fold == Some(f)).collect();
            let reference = &in_fold[0].valid;
            let gold_col = reference
                .sample_ids
                .iter()
                .map(|id| {
                    gold.get(id)
                        .copied()
                        .ok_or_else(|| Error::config(format!("sample {id} has no gold labels")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut candidates = Vec::new();
            for part in 0..composition.part_count() {
                let mut per_group = Vec::new();
                for g in groups(layout) {
                    let mut list = Vec::new();
                    for m in in_fold.iter().filter(|m| m.layout == g && composition.admits(part, m)) {
                        let valid = aligned_column(reference, &m.valid)?;
                        let curves = if macro_curves {
                            let es_gold = m
                                .early_stop
                                .sample_ids
                                .iter()
                                .map(|id| {
                                    gold.get(id).copied().ok_or_else(|| {
                                        Error::config(format!("sample {id} has no gold labels"))
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?;
                            if m.early_stop.is_empty() {
                                return Err(Error::config(format!(
                                    "model `{}` has no calibration samples",
                                    m.id
                                )));
                            }
                            Some(Task::ALL.map(|t| threshold_curve(&m.early_stop, &es_gold, t, &grid)))
                        } else {
                            None
                        };
                        list.push(Prepared {
                            member: m,
                            valid,
                            curves,
                        });
                    }
                    if list.is_empty() {
                        let what = if composition.parts.is_empty() {
                            "the pool".to_owned()
                        } else {
                            format!("family `{}`", composition.parts[part].0)
                        };
                        return Err(Error::config(format!(
                            "{what} has no {g} members on fold {f}"
                        )));
                    }
                    per_group.push(list);
                }
                candidates.push(per_group);
            }
            folds.push(FoldData {
                reference,
                gold: gold_col,
                candidates,
            });
        }
        Ok(PreparedPool {
            folds,
            layout,
            grid,
            gold,
        })
    }

    /// Member choices for one draw: `[fold][group]` lists of candidate
    /// indices, flattened over parts.
    fn draw(&self, composition: &Composition, master: u64, size: usize, draw: usize) -> Vec<Vec<Vec<(usize, usize)>>> {
        let alloc = composition.allocate(size);
        let mut rng = seed::stream(master, &[size as u64, draw as u64]);
        self.folds
            .iter()
            .map(|fold| {
                (0..groups(self.layout).len())
                    .map(|g| {
                        let mut chosen = Vec::with_capacity(size);
                        for (part, &count) in alloc.iter().enumerate() {
                            let n = fold.candidates[part][g].len();
                            for _ in 0..count {
                                chosen.push((part, rng.gen_range(0..n)));
                            }
                        }
                        chosen
                    })
                    .collect()
            })
            .collect()
    }

    /// Member ids of one draw, per fold.
    pub fn draw_members(&self, composition: &Composition, master: u64, size: usize, draw: usize) -> Vec<Vec<&'a str>> {
        self.draw(composition, master, size, draw)
            .iter()
            .zip(&self.folds)
            .map(|(per_group, fold)| {
                per_group
                    .iter()
                    .enumerate()
                    .flat_map(|(g, picks)| {
                        picks
                            .iter()
                            .map(move |&(part, i)| fold.candidates[part][g][i].member.id.as_str())
                    })
                    .collect()
            })
            .collect()
    }

    /// Fold-averaged macro-F1 of one draw.
    fn score(&self, choice: &[Vec<Vec<(usize, usize)>>], options: &EnsembleOptions) -> Result<f64> {
        let mut total = 0.0;
        for (fold, per_group) in self.folds.iter().zip(choice) {
            let n = fold.reference.len();
            let mut confusion = [ConfusionMatrix::default(); 3];
            match self.layout {
                Layout::MultiLabel => {
                    let members: Vec<&Prepared> =
                        per_group[0].iter().map(|&(p, i)| &fold.candidates[p][0][i]).collect();
                    let columns: Vec<&[f64]> = members.iter().map(|m| m.valid.as_slice()).collect();
                    let mut avg = vec![0.0; n * 3];
                    mean_columns(&columns, &mut avg);
                    let thresholds = self.thresholds(&members, options)?;
                    for (i, g) in fold.gold.iter().enumerate() {
                        for k in 0..3 {
                            confusion[k].record(g.0[k], avg[i * 3 + k] >= thresholds[k]);
                        }
                    }
                }
                Layout::SingleLabel(_) => {
                    let mut avg = vec![0.0; n];
                    for (k, picks) in per_group.iter().enumerate() {
                        let columns: Vec<&[f64]> = picks
                            .iter()
                            .map(|&(p, i)| fold.candidates[p][k][i].valid.as_slice())
                            .collect();
                        mean_columns(&columns, &mut avg);
                        for (g, &p) in fold.gold.iter().zip(&avg) {
                            confusion[k].record(g.0[k], p >= 0.5);
                        }
                    }
                }
            }
            total += EvalReport::from_confusion(confusion).macro_f1;
        }
        Ok(total / self.folds.len() as f64)
    }

    fn thresholds(&self, members: &[&Prepared], options: &EnsembleOptions) -> Result<[f64; 3]> {
        match options.thresholds {
            ThresholdMode::Fixed(v) => Ok([v; 3]),
            ThresholdMode::Calibrated(Criterion::Macro) => {
                let len = self.grid.len();
                let mut best = [0.0; 3];
                for (k, b) in best.iter_mut().enumerate() {
                    let mut sums = vec![0.0; len];
                    for m in members {
                        let curve = &m.curves.as_ref().expect("prepared for macro")[k];
                        for (s, c) in sums.iter_mut().zip(curve) {
                            *s += c;
                        }
                    }
                    let n = members.len() as f64;
                    let avg: Vec<f64> = sums.into_iter().map(|s| s / n).collect();
                    *b = self.grid[argmax(&avg)];
                }
                Ok(best)
            }
            ThresholdMode::Calibrated(c) => {
                let tables: Vec<&ProbabilityTable> = members.iter().map(|m| &m.member.early_stop).collect();
                let curves = criterion_curves(&tables, self.gold, &self.grid, c)?;
                Ok([0, 1, 2].map(|k| self.grid[argmax(&curves[k])]))
            }
        }
    }
}

fn aligned_column(reference: &ProbabilityTable, table: &ProbabilityTable) -> Result<Vec<f64>> {
    if table.sample_ids == reference.sample_ids {
        return Ok(table.probs.clone());
    }
    let index = table.index();
    let mut out = Vec::with_capacity(table.probs.len());
    for id in &reference.sample_ids {
        let i = index.get(id).ok_or_else(|| {
            Error::Alignment(format!(
                "model `{}` lacks validation sample {id} present in `{}`",
                table.model_id, reference.model_id
            ))
        })?;
        out.extend_from_slice(table.row(*i));
    }
    if table.len() != reference.len() {
        return Err(Error::Alignment(format!(
            "model `{}` covers {} validation samples, `{}` covers {}",
            table.model_id,
            table.len(),
            reference.model_id,
            reference.len()
        )));
    }
    Ok(out)
}

/// Runs the experiment. Every `(size, draw)` pair has its own RNG stream,
/// so the result does not depend on the thread count.
pub fn run_bootstrap(
    pool: &Pool,
    gold: &HashMap<u64, LabelSet>,
    config: &BootstrapConfig,
) -> Result<BootstrapSummary> {
    if pool.is_empty() {
        return Err(Error::config("bootstrap pool is empty"));
    }
    if config.sizes.is_empty() || config.sizes.contains(&0) {
        return Err(Error::config("ensemble sizes must be at least 1"));
    }
    if config.samples_per_size == 0 {
        return Err(Error::config("samples_per_size must be at least 1"));
    }
    let prepared = PreparedPool::new(pool, gold, &config.composition, &config.ensemble)?;

    let jobs: Vec<(usize, usize)> = config
        .sizes
        .iter()
        .flat_map(|&s| (0..config.samples_per_size).map(move |d| (s, d)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(size, d)| {
            let choice = prepared.draw(&config.composition, config.seed, size, d);
            prepared.score(&choice, &config.ensemble)
        })
        .collect::<Result<Vec<f64>>>()?;

    let sizes = config
        .sizes
        .iter()
        .zip(scores.chunks(config.samples_per_size))
        .map(|(&size, samples)| {
            let (mean, std) = mean_std(samples);
            SizeResult {
                size,
                mean,
                std,
                samples: samples.to_vec(),
            }
        })
        .collect();

    Ok(BootstrapSummary {
        composition: config.composition.clone(),
        seed: config.seed,
        samples_per_size: config.samples_per_size,
        pool: pool.members.iter().map(|m| m.id.clone()).collect(),
        sizes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub size: usize,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
    pub n_samples: usize,
}

/// Mean and population standard deviation per size, recomputed from the
/// stored samples.
pub fn summarize(summary: &BootstrapSummary) -> Vec<SummaryRow> {
    summary
        .sizes
        .iter()
        .map(|s| {
            let (mean, std) = mean_std(&s.samples);
            SummaryRow {
                size: s.size,
                mean_macro_f1: mean,
                std_macro_f1: std,
                n_samples: s.samples.len(),
            }
        })
        .collect()
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Every draw's score: `size, draw, macro_f1`.
pub fn write_samples_csv(path: &Path, summary: &BootstrapSummary) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["size", "draw", "macro_f1"])?;
    for s in &summary.sizes {
        for (d, v) in s.samples.iter().enumerate() {
            w.write_record([s.size.to_string(), d.to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
