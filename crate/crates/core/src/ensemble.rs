//! Soft voting over member probabilities, threshold calibration and label
//! prediction.
//!
//! Multi-label ensembles average the members' class probabilities and assign
//! a class when the average reaches that class's calibrated threshold.
//! Single-label ensembles average the positive-class probability of each
//! task's binary members and predict the larger of the two classes.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::{Pool, PoolMember};
use crate::metrics::{evaluate, germeval_f1, mean_std, ConfusionMatrix, EvalReport};
use crate::table::{Layout, ProbabilityTable};
use crate::{Error, LabelSet, Result, Task};

pub const GRID_STEP: f64 = 0.025;

/// How thresholds are chosen from early-stopping predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// Average the members' probabilities on the early-stopping samples
    /// (each sample over the members that held it out) and pick, per class,
    /// the threshold with the best F1.
    PerClass,
    /// Score every member on its own early-stopping subset at every grid
    /// point, average the scores over members and pick the best. Because the
    /// macro score is a sum of per-class terms this is done class by class.
    Macro,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub toxic: f64,
    pub engaging: f64,
    pub fact: f64,
    pub grid_step: f64,
    pub criterion: Criterion,
    /// Criterion value reached by each selected threshold.
    pub scores: [f64; 3],
}

impl Thresholds {
    pub fn fixed(value: f64) -> Thresholds {
        Thresholds {
            toxic: value,
            engaging: value,
            fact: value,
            grid_step: 0.0,
            criterion: Criterion::PerClass,
            scores: [f64::NAN; 3],
        }
    }

    pub fn values(&self) -> [f64; 3] {
        [self.toxic, self.engaging, self.fact]
    }
}

/// The points `k · step` for `k = 0 ..= 1/step`, both ends included.
pub fn grid_points(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::config(format!("grid step {step} outside (0, 1]")));
    }
    let n = (1.0 / step).round() as usize;
    if ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("grid step {step} does not divide 1")));
    }
    Ok((0..=n).map(|k| k as f64 / n as f64).collect())
}

/// Mean of aligned columns. Identical columns return the shared value
/// unchanged, so voting over copies of one member reproduces it bit for bit.
pub(crate) fn mean_columns(columns: &[&[f64]], out: &mut [f64]) {
    let first = columns[0];
    let n = columns.len() as f64;
    for (j, o) in out.iter_mut().enumerate() {
        let x0 = first[j];
        *o = if columns[1..].iter().all(|c| c[j] == x0) {
            x0
        } else {
            (columns.iter().map(|c| c[j]).sum::<f64>() / n).clamp(0.0, 1.0)
        };
    }
}

fn offenders(reference: &ProbabilityTable, other: &ProbabilityTable) -> String {
    let a = reference.index();
    let b = other.index();
    let mut missing: Vec<u64> = reference.sample_ids.iter().filter(|s| !b.contains_key(s)).copied().collect();
    let mut extra: Vec<u64> = other.sample_ids.iter().filter(|s| !a.contains_key(s)).copied().collect();
    missing.truncate(10);
    extra.truncate(10);
    format!(
        "model `{}` vs `{}`: missing sample ids {:?}, unexpected sample ids {:?}",
        other.model_id, reference.model_id, missing, extra
    )
}

/// Reorders `table` to the sample order of `reference`.
fn aligned(reference: &ProbabilityTable, table: &ProbabilityTable) -> Result<Vec<f64>> {
    if table.sample_ids == reference.sample_ids {
        return Ok(table.probs.clone());
    }
    if table.len() != reference.len() {
        return Err(Error::Alignment(offenders(reference, table)));
    }
    let index = table.index();
    let mut out = Vec::with_capacity(table.probs.len());
    for id in &reference.sample_ids {
        match index.get(id) {
            Some(&i) => out.extend_from_slice(table.row(i)),
            None => return Err(Error::Alignment(offenders(reference, table))),
        }
    }
    Ok(out)
}

/// Elementwise mean of member tables over the same samples and layout. The
/// result follows the sample order of the first table.
pub fn soft_vote(tables: &[&ProbabilityTable]) -> Result<ProbabilityTable> {
    let first = *tables
        .first()
        .ok_or_else(|| Error::config("soft vote needs at least one member"))?;
    if let Some(t) = tables.iter().find(|t| t.layout != first.layout) {
        return Err(Error::Alignment(format!(
            "model `{}` has layout {}, expected {}",
            t.model_id, t.layout, first.layout
        )));
    }
    let columns = tables
        .iter()
        .map(|t| aligned(first, t))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let mut probs = vec![0.0; first.probs.len()];
    mean_columns(&refs, &mut probs);
    Ok(ProbabilityTable {
        model_id: format!("ensemble({})", tables.len()),
        layout: first.layout,
        sample_ids: first.sample_ids.clone(),
        probs,
    })
}

/// Averages tables over the union of their samples; each sample is averaged
/// over the members that contain it. Samples keep first-appearance order.
fn pooled_vote(tables: &[&ProbabilityTable]) -> ProbabilityTable {
    let mut rows: Vec<Vec<&[f64]>> = Vec::new();
    let mut ids = Vec::new();
    let mut slot: HashMap<u64, usize> = HashMap::new();
    for t in tables {
        for (i, &id) in t.sample_ids.iter().enumerate() {
            let k = *slot.entry(id).or_insert_with(|| {
                ids.push(id);
                rows.push(Vec::new());
                ids.len() - 1
            });
            rows[k].push(t.row(i));
        }
    }
    let mut out = ProbabilityTable::new(format!("pooled({})", tables.len()), Layout::MultiLabel);
    let mut buf = [0.0; 3];
    for (id, members) in ids.into_iter().zip(rows) {
        mean_columns(&members, &mut buf);
        out.push(id, &buf);
    }
    out
}

fn gold_column(
    table: &ProbabilityTable,
    gold: &HashMap<u64, LabelSet>,
) -> Result<Vec<LabelSet>> {
    table
        .sample_ids
        .iter()
        .map(|id| {
            gold.get(id).copied().ok_or_else(|| {
                Error::config(format!(
                    "calibration sample {id} of model `{}` has no gold labels",
                    table.model_id
                ))
            })
        })
        .collect()
}

/// F1 of class `task` at every grid point, deciding positive when `p >= t`.
pub fn threshold_curve(
    table: &ProbabilityTable,
    gold: &[LabelSet],
    task: Task,
    grid: &[f64],
) -> Vec<f64> {
    grid.iter()
        .map(|&t| {
            let mut m = ConfusionMatrix::default();
            for (i, g) in gold.iter().enumerate() {
                m.record(g.get(task), table.row(i)[task.index()] >= t);
            }
            germeval_f1(&m)
        })
        .collect()
}

/// Index of the largest value; the smallest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Criterion curves (one per class, one value per grid point).
pub fn criterion_curves(
    calibration: &[&ProbabilityTable],
    gold: &HashMap<u64, LabelSet>,
    grid: &[f64],
    criterion: Criterion,
) -> Result<[Vec<f64>; 3]> {
    if calibration.is_empty() {
        return Err(Error::config("threshold selection needs calibration predictions"));
    }
    if let Some(t) = calibration.iter().find(|t| t.layout != Layout::MultiLabel) {
        return Err(Error::config(format!(
            "thresholds apply to multi-label models; `{}` is {}",
            t.model_id, t.layout
        )));
    }
    if let Some(t) = calibration.iter().find(|t| t.is_empty()) {
        return Err(Error::config(format!("model `{}` has no calibration samples", t.model_id)));
    }
    match criterion {
        Criterion::PerClass => {
            let pooled = pooled_vote(calibration);
            let g = gold_column(&pooled, gold)?;
            Ok(Task::ALL.map(|task| threshold_curve(&pooled, &g, task, grid)))
        }
        Criterion::Macro => {
            let mut sums = [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]];
            for t in calibration {
                let g = gold_column(t, gold)?;
                for task in Task::ALL {
                    let curve = threshold_curve(t, &g, task, grid);
                    for (s, c) in sums[task.index()].iter_mut().zip(curve) {
                        *s += c;
                    }
                }
            }
            let n = calibration.len() as f64;
            Ok(sums.map(|s| s.into_iter().map(|x| x / n).collect()))
        }
    }
}

pub fn select_thresholds(
    calibration: &[&ProbabilityTable],
    gold: &HashMap<u64, LabelSet>,
    grid_step: f64,
    criterion: Criterion,
) -> Result<Thresholds> {
    let grid = grid_points(grid_step)?;
    let curves = criterion_curves(calibration, gold, &grid, criterion)?;
    let best = curves.each_ref().map(|c| argmax(c));
    Ok(Thresholds {
        toxic: grid[best[0]],
        engaging: grid[best[1]],
        fact: grid[best[2]],
        grid_step,
        criterion,
        scores: [0, 1, 2].map(|k| curves[k][best[k]]),
    })
}

pub fn predict_multilabel(averaged: &ProbabilityTable, thresholds: &Thresholds) -> Vec<LabelSet> {
    let t = thresholds.values();
    (0..averaged.len())
        .map(|i| {
            let p = averaged.row(i);
            LabelSet([p[0] >= t[0], p[1] >= t[1], p[2] >= t[2]])
        })
        .collect()
}

/// Per task, positive iff the averaged positive probability is at least the
/// averaged negative one, i.e. at least 0.5. Input: one averaged table per
/// task in any order; output follows the first table's sample order.
pub fn predict_singlelabel(averaged: &[&ProbabilityTable]) -> Result<Vec<LabelSet>> {
    let mut by_task: [Option<&ProbabilityTable>; 3] = [None; 3];
    for t in averaged {
        match t.layout {
            Layout::SingleLabel(task) => by_task[task.index()] = Some(t),
            Layout::MultiLabel => {
                return Err(Error::config(format!("`{}` is not a single-label table", t.model_id)))
            }
        }
    }
    let tables: Vec<&ProbabilityTable> = Task::ALL
        .iter()
        .map(|task| {
            by_task[task.index()]
                .ok_or_else(|| Error::config(format!("no single-label predictions for task {task}")))
        })
        .collect::<Result<_>>()?;
    let reference = averaged[0];
    let columns = tables
        .iter()
        .map(|t| aligned(reference, t))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..reference.len())
        .map(|i| LabelSet([columns[0][i] >= 0.5, columns[1][i] >= 0.5, columns[2][i] >= 0.5]))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum ThresholdMode {
    Calibrated(Criterion),
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleOptions {
    pub grid_step: f64,
    pub thresholds: ThresholdMode,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            grid_step: GRID_STEP,
            thresholds: ThresholdMode::Calibrated(Criterion::Macro),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub sample_ids: Vec<u64>,
    pub labels: Vec<LabelSet>,
    /// Thresholds used for multi-label ensembles.
    pub thresholds: Option<Thresholds>,
}

/// Predicts labels for the target samples from member tables.
///
/// `targets` are the members' predictions on the samples to label;
/// `calibration` their early-stopping predictions, scored against
/// `calibration_gold` (only used for calibrated multi-label thresholds).
pub fn predict_ensemble(
    targets: &[&ProbabilityTable],
    calibration: &[&ProbabilityTable],
    calibration_gold: &HashMap<u64, LabelSet>,
    options: &EnsembleOptions,
) -> Result<EnsemblePrediction> {
    let first = targets
        .first()
        .ok_or_else(|| Error::config("ensemble has no members"))?;
    match first.layout {
        Layout::MultiLabel => {
            let averaged = soft_vote(targets)?;
            let thresholds = match options.thresholds {
                ThresholdMode::Fixed(v) => Thresholds::fixed(v),
                ThresholdMode::Calibrated(c) => {
                    select_thresholds(calibration, calibration_gold, options.grid_step, c)?
                }
            };
            Ok(EnsemblePrediction {
                labels: predict_multilabel(&averaged, &thresholds),
                sample_ids: averaged.sample_ids,
                thresholds: Some(thresholds),
            })
        }
        Layout::SingleLabel(_) => {
            let mut averaged = Vec::new();
            for task in Task::ALL {
                let members: Vec<&ProbabilityTable> = targets
                    .iter()
                    .filter(|t| t.layout == Layout::SingleLabel(task))
                    .copied()
                    .collect();
                if members.is_empty() {
                    return Err(Error::config(format!("ensemble has no member for task {task}")));
                }
                averaged.push(soft_vote(&members)?);
            }
            if targets.iter().any(|t| t.layout == Layout::MultiLabel) {
                return Err(Error::config("cannot mix single-label and multi-label members"));
            }
            let mut refs: Vec<&ProbabilityTable> = averaged.iter().collect();
            // follow the first member's sample order
            let lead = Task::ALL.iter().position(|&t| first.layout == Layout::SingleLabel(t)).unwrap();
            refs.swap(0, lead);
            Ok(EnsemblePrediction {
                labels: predict_singlelabel(&refs)?,
                sample_ids: refs[0].sample_ids.clone(),
                thresholds: None,
            })
        }
    }
}

/// [`predict_ensemble`] followed by scoring against `target_gold`.
pub fn evaluate_ensemble(
    targets: &[&ProbabilityTable],
    calibration: &[&ProbabilityTable],
    calibration_gold: &HashMap<u64, LabelSet>,
    target_gold: &HashMap<u64, LabelSet>,
    options: &EnsembleOptions,
) -> Result<(EvalReport, EnsemblePrediction)> {
    let prediction = predict_ensemble(targets, calibration, calibration_gold, options)?;
    let gold = prediction
        .sample_ids
        .iter()
        .map(|id| {
            target_gold
                .get(id)
                .copied()
                .ok_or_else(|| Error::config(format!("sample {id} has no gold labels")))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate(&gold, &prediction.labels)?;
    Ok((report, prediction))
}

/// Which pool members form an ensemble on each fold.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Restrict to these families; all families when empty.
    pub families: Vec<String>,
    /// Member slots, repeats allowed; all slots when `None`.
    pub slots: Option<Vec<usize>>,
}

impl EnsembleSpec {
    /// Members of `fold` in slot order (one per task for single-label
    /// pools). Repeated slots repeat their members.
    pub fn members<'a>(&self, pool: &'a Pool, fold: Option<usize>) -> Vec<&'a PoolMember> {
        let in_fold = pool
            .members
            .iter()
            .filter(|m| m.fold == fold)
            .filter(|m| self.families.is_empty() || self.families.contains(&m.family));
        match &self.slots {
            None => in_fold.collect(),
            Some(slots) => {
                let candidates: Vec<&PoolMember> = in_fold.collect();
                slots
                    .iter()
                    .flat_map(|&s| candidates.iter().filter(move |m| m.slot == s).copied())
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub members: Vec<String>,
    pub report: EvalReport,
    pub thresholds: Option<Thresholds>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    /// Mean and population std over folds of macro, toxic, engaging, fact F1.
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl CrossValidation {
    /// `mean (std)` cells in the usual column order.
    pub fn summary_line(&self) -> String {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| format!("{m:.3} ({s:.3})"))
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

/// Evaluates the ensemble on every validation fold of the pool.
pub fn cross_validate(
    pool: &Pool,
    spec: &EnsembleSpec,
    gold: &HashMap<u64, LabelSet>,
    options: &EnsembleOptions,
) -> Result<CrossValidation> {
    let mut folds: Vec<usize> = pool.members.iter().filter_map(|m| m.fold).collect();
    folds.sort_unstable();
    folds.dedup();
    if folds.is_empty() {
        return Err(Error::config("pool has no cross-validation members"));
    }
    let mut results = Vec::with_capacity(folds.len());
    for f in folds {
        let members = spec.members(pool, Some(f));
        if members.is_empty() {
            return Err(Error::config(format!("no ensemble members on fold {f}")));
        }
        let targets: Vec<&ProbabilityTable> = members.iter().map(|m| &m.valid).collect();
        let calibration: Vec<&ProbabilityTable> = members.iter().map(|m| &m.early_stop).collect();
        let (report, prediction) = evaluate_ensemble(&targets, &calibration, gold, gold, options)?;
        results.push(FoldResult {
            fold: f,
            members: members.iter().map(|m| m.id.clone()).collect(),
            report,
            thresholds: prediction.thresholds,
        });
    }
    let column = |k: usize| -> Vec<f64> {
        results
            .iter()
            .map(|r| {
                let rep = &r.report;
                [rep.macro_f1, rep.f1_toxic, rep.f1_engaging, rep.f1_fact][k]
            })
            .collect()
    };
    let stats = [0, 1, 2, 3].map(|k| mean_std(&column(k)));
    Ok(CrossValidation {
        folds: results,
        mean: stats.map(|s| s.0),
        std: stats.map(|s| s.1),
    })
}

/// Writes predictions in the shared-task answer layout.
pub fn write_answers(path: &Path, ids: &[String], labels: &[LabelSet]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "answer ids and labels",
            left: ids.len(),
            right: labels.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["comment_id", "Sub1_Toxic", "Sub2_Engaging", "Sub3_FactClaiming"])?;
    for (id, l) in ids.iter().zip(labels) {
        let cell = |b: bool| if b { "1" } else { "0" };
        w.write_record([id.as_str(), cell(l.0[0]), cell(l.0[1]), cell(l.0[2])])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
