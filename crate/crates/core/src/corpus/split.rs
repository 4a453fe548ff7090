use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// A k-fold partition of dataset positions plus one early-stopping subset
/// per fold, drawn from that fold's training portion.
///
/// Indices are positions in the dataset the plan was made for, not comment
/// ids. All index lists are sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub k: usize,
    pub fraction: f64,
    pub size: usize,
    pub folds: Vec<Vec<usize>>,
    pub early_stop: Vec<Vec<usize>>,
}

/// `round(fraction * n)` with halves rounded up.
pub fn early_stop_size(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 0.5).floor() as usize
}

pub fn make_fold_plan(size: usize, k: usize, fraction: f64, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config(format!("k must be at least 2, got {k}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "early-stop fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if size < k {
        return Err(Error::TooSmall { size, k });
    }

    let mut order: Vec<usize> = (0..size).collect();
    order.shuffle(&mut seed::stream(seed, &[0]));

    let (base, extra) = (size / k, size % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }

    let mut plan = FoldPlan {
        seed,
        k,
        fraction,
        size,
        folds,
        early_stop: Vec::with_capacity(k),
    };
    for f in 0..k {
        let mut pool = plan.training(f);
        let n = early_stop_size(fraction, pool.len());
        pool.shuffle(&mut seed::stream(seed, &[1, f as u64]));
        let mut es = pool[..n].to_vec();
        es.sort_unstable();
        plan.early_stop.push(es);
    }
    Ok(plan)
}

impl FoldPlan {
    /// Every position outside validation fold `f`.
    pub fn training(&self, f: usize) -> Vec<usize> {
        let mut in_fold = vec![false; self.size];
        for &i in &self.folds[f] {
            in_fold[i] = true;
        }
        (0..self.size).filter(|&i| !in_fold[i]).collect()
    }

    /// Checks the partition and sizing invariants, e.g. after loading a plan
    /// from disk.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(format!("invalid fold plan: {m}")));
        if self.folds.len() != self.k || self.early_stop.len() != self.k {
            return bad(format!("expected {} folds", self.k));
        }
        let mut owner = vec![usize::MAX; self.size];
        for (f, fold) in self.folds.iter().enumerate() {
            for &i in fold {
                if i >= self.size {
                    return bad(format!("index {i} out of range"));
                }
                if owner[i] != usize::MAX {
                    return bad(format!("index {i} in folds {} and {f}", owner[i]));
                }
                owner[i] = f;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return bad(format!("index {i} not assigned to any fold"));
        }
        let sizes = self.folds.iter().map(Vec::len);
        if sizes.clone().max().unwrap_or(0) - sizes.min().unwrap_or(0) > 1 {
            return bad("fold sizes differ by more than one".into());
        }
        for (f, es) in self.early_stop.iter().enumerate() {
            if let Some(&i) = es.iter().find(|&&i| i >= self.size || owner[i] == f) {
                return bad(format!("early-stop index {i} overlaps validation fold {f}"));
            }
            let want = early_stop_size(self.fraction, self.size - self.folds[f].len());
            if es.len() != want {
                return bad(format!("early-stop set {f} has {} entries, expected {want}", es.len()));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<FoldPlan> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let plan: FoldPlan = serde_json::from_str(&raw)?;
        plan.validate()?;
        Ok(plan)
    }
}
