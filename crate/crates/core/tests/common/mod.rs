#![allow(dead_code)]

use std::collections::HashMap;

use germeval_core::baseline::{Pool, PoolMember};
use germeval_core::{LabelSet, Layout, ProbabilityTable};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    germeval_core::seed::stream(seed, &[0x7e57])
}

/// Shared-task F1 written out from the definitions, independent of the
/// library: precision and recall of each class occurring in gold or
/// predictions, averaged, then their harmonic mean.
pub fn oracle_f1(tp: u64, fp: u64, fn_: u64, tn: u64) -> f64 {
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut classes = Vec::new();
    // positive class: predicted positive = tp + fp, actually positive = tp + fn
    if tp + fp + fn_ > 0 {
        classes.push((div(tp, tp + fp), div(tp, tp + fn_)));
    }
    // negative class: predicted negative = tn + fn, actually negative = tn + fp
    if tn + fn_ + fp > 0 {
        classes.push((div(tn, tn + fn_), div(tn, tn + fp)));
    }
    if classes.is_empty() {
        return 0.0;
    }
    let k = classes.len() as f64;
    let p: f64 = classes.iter().map(|c| c.0).sum::<f64>() / k;
    let r: f64 = classes.iter().map(|c| c.1).sum::<f64>() / k;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// F1 of one task computed by a plain loop over `(gold, p)` pairs at
/// threshold `t`.
pub fn oracle_task_f1(gold: &[bool], probs: &[f64], t: f64) -> f64 {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&g, &p) in gold.iter().zip(probs) {
        match (g, p >= t) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    oracle_f1(tp, fp, fn_, tn)
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<LabelSet> {
    (0..n)
        .map(|_| LabelSet::new(rng.gen_bool(0.4), rng.gen_bool(0.3), rng.gen_bool(0.35)))
        .collect()
}

pub fn multi_table(id: &str, ids: &[u64], rows: &[[f64; 3]]) -> ProbabilityTable {
    let mut t = ProbabilityTable::new(id, Layout::MultiLabel);
    for (&s, r) in ids.iter().zip(rows) {
        t.push(s, r);
    }
    t
}

/// Noisy probabilities around the gold labels: `signal` pulls towards the
/// truth, `noise` is uniform.
pub fn noisy_rows(rng: &mut ChaCha8Rng, gold: &[LabelSet], signal: f64, noise: f64) -> Vec<[f64; 3]> {
    gold.iter()
        .map(|g| {
            g.0.map(|y| {
                let centre = if y { 0.5 + signal } else { 0.5 - signal };
                (centre + rng.gen_range(-noise..noise)).clamp(0.0, 1.0)
            })
        })
        .collect()
}

pub fn member(id: &str, family: &str, fold: usize, slot: usize, valid: ProbabilityTable, early_stop: ProbabilityTable) -> PoolMember {
    PoolMember {
        id: id.to_owned(),
        family: family.to_owned(),
        layout: valid.layout,
        fold: Some(fold),
        slot,
        seed: slot as u64,
        best_update: 0,
        best_score: 0.0,
        valid,
        early_stop,
        model: None,
    }
}

/// A multi-label pool of noisy members over `folds` folds of `per_fold`
/// samples each. Every member holds out its own random early-stopping
/// subset of the other folds' samples.
pub fn toy_pool(
    seed: u64,
    families: &[&str],
    members_per_family: usize,
    folds: usize,
    per_fold: usize,
    noise: f64,
) -> (Pool, HashMap<u64, LabelSet>) {
    let mut rng = rng(seed);
    let n = folds * per_fold;
    let labels = random_labels(&mut rng, n);
    let gold: HashMap<u64, LabelSet> = labels.iter().enumerate().map(|(i, &l)| (i as u64, l)).collect();
    let mut members = Vec::new();
    for f in 0..folds {
        let valid_ids: Vec<u64> = (f * per_fold..(f + 1) * per_fold).map(|i| i as u64).collect();
        let others: Vec<u64> = (0..n as u64).filter(|i| !valid_ids.contains(i)).collect();
        for family in families {
            for slot in 0..members_per_family {
                let es_ids: Vec<u64> = others.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
                let es_ids = if es_ids.is_empty() { vec![others[0]] } else { es_ids };
                let signal = rng.gen_range(0.05..0.2);
                let vg: Vec<LabelSet> = valid_ids.iter().map(|i| gold[i]).collect();
                let eg: Vec<LabelSet> = es_ids.iter().map(|i| gold[i]).collect();
                let id = format!("{family}-f{f}-{slot:03}");
                let valid = multi_table(&id, &valid_ids, &noisy_rows(&mut rng, &vg, signal, noise));
                let early_stop = multi_table(&id, &es_ids, &noisy_rows(&mut rng, &eg, signal, noise));
                members.push(member(&id, family, f, slot, valid, early_stop));
            }
        }
    }
    (Pool { members }, gold)
}
