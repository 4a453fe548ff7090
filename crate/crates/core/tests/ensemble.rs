mod common;

use std::collections::HashMap;

use common::{multi_table, oracle_task_f1, random_labels, rng};
use germeval_core::ensemble::{
    evaluate_ensemble, predict_singlelabel, select_thresholds, soft_vote, EnsembleOptions, ThresholdMode,
    GRID_STEP,
};
use germeval_core::{ConfusionMatrix, Criterion, LabelSet, Layout, ProbabilityTable, Task};
use rand::seq::SliceRandom;
use rand::Rng;

fn random_multi(r: &mut impl Rng, id: &str, ids: &[u64]) -> ProbabilityTable {
    let rows: Vec<[f64; 3]> = ids.iter().map(|_| [r.gen(), r.gen(), r.gen()]).collect();
    multi_table(id, ids, &rows)
}

#[test]
fn soft_vote_matches_cell_loop() {
    let mut r = rng(20);
    for _ in 0..20 {
        let ids: Vec<u64> = (0..50).collect();
        let tables: Vec<ProbabilityTable> = (0..7).map(|k| random_multi(&mut r, &format!("m{k}"), &ids)).collect();
        let refs: Vec<&ProbabilityTable> = tables.iter().collect();
        let v = soft_vote(&refs).unwrap();
        for cell in 0..ids.len() * 3 {
            let mut sum = 0.0;
            for t in &tables {
                sum += t.probs[cell];
            }
            assert!((v.probs[cell] - sum / 7.0).abs() < 1e-15);
        }
        assert!(v.probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

#[test]
fn soft_vote_is_permutation_invariant_and_duplicate_idempotent() {
    let mut r = rng(21);
    let ids: Vec<u64> = (0..30).collect();
    let tables: Vec<ProbabilityTable> = (0..5).map(|k| random_multi(&mut r, &format!("m{k}"), &ids)).collect();
    let mut refs: Vec<&ProbabilityTable> = tables.iter().collect();
    let base = soft_vote(&refs).unwrap();
    for _ in 0..10 {
        refs.shuffle(&mut r);
        let v = soft_vote(&refs).unwrap();
        for (a, b) in v.probs.iter().zip(&base.probs) {
            assert!((a - b).abs() < 1e-15);
        }
    }
    for t in &tables {
        for copies in 1..6 {
            assert_eq!(soft_vote(&vec![t; copies]).unwrap().probs, t.probs);
        }
    }
    // single-label pairs stay normalized: implied negatives are 1 - p
    let single: Vec<ProbabilityTable> = (0..4)
        .map(|k| {
            let mut t = ProbabilityTable::new(format!("s{k}"), Layout::SingleLabel(Task::Fact));
            for &i in &ids {
                t.push(i, &[r.gen()]);
            }
            t
        })
        .collect();
    let v = soft_vote(&single.iter().collect::<Vec<_>>()).unwrap();
    for (i, p) in v.probs.iter().enumerate() {
        let neg: f64 = single.iter().map(|t| 1.0 - t.probs[i]).sum::<f64>() / 4.0;
        assert!((p + neg - 1.0).abs() < 1e-12);
    }
}

/// Rescans all 41 grid points for one class. Returns the best value and
/// the smallest grid index attaining it.
fn rescan(curve: impl Fn(f64) -> f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..=40 {
        let v = curve(k as f64 / 40.0);
        if v > best.0 {
            best = (v, k);
        }
    }
    best
}

#[test]
fn selected_thresholds_attain_the_grid_maximum() {
    let mut r = rng(22);
    for case in 0..100 {
        let n = 40u64;
        let labels = random_labels(&mut r, n as usize);
        let gold: HashMap<u64, LabelSet> = labels.iter().enumerate().map(|(i, &l)| (i as u64, l)).collect();
        let members: Vec<ProbabilityTable> = (0..r.gen_range(1..6))
            .map(|k| {
                let ids: Vec<u64> = (0..n).filter(|_| r.gen_bool(0.4)).collect();
                let ids = if ids.is_empty() { vec![0] } else { ids };
                // coarse values make ties and exact threshold hits common
                let rows: Vec<[f64; 3]> = ids
                    .iter()
                    .map(|_| [0; 3].map(|_| if case % 2 == 0 { r.gen_range(0..=8) as f64 / 8.0 } else { r.gen() }))
                    .collect();
                multi_table(&format!("m{k}"), &ids, &rows)
            })
            .collect();
        let refs: Vec<&ProbabilityTable> = members.iter().collect();
        let column = |t: &ProbabilityTable, task: Task| -> (Vec<bool>, Vec<f64>) {
            (
                t.sample_ids.iter().map(|i| gold[i].get(task)).collect(),
                (0..t.len()).map(|i| t.row(i)[task.index()]).collect(),
            )
        };

        let macro_th = select_thresholds(&refs, &gold, GRID_STEP, Criterion::Macro).unwrap();
        for task in Task::ALL {
            let mean_f1 = |t: f64| {
                let total: f64 = members
                    .iter()
                    .map(|m| {
                        let (g, p) = column(m, task);
                        oracle_task_f1(&g, &p, t)
                    })
                    .sum();
                total / members.len() as f64
            };
            let (best, k) = rescan(mean_f1);
            assert!((macro_th.scores[task.index()] - best).abs() < 1e-12, "case {case}");
            assert!((mean_f1(macro_th.values()[task.index()]) - best).abs() < 1e-12);
            assert_eq!(macro_th.values()[task.index()], k as f64 / 40.0);
        }

        let per_class = select_thresholds(&refs, &gold, GRID_STEP, Criterion::PerClass).unwrap();
        // pooled calibration set: every sample averaged over the members holding it
        let mut pooled: HashMap<u64, Vec<[f64; 3]>> = HashMap::new();
        for m in &members {
            for (i, id) in m.sample_ids.iter().enumerate() {
                let row = m.row(i);
                pooled.entry(*id).or_default().push([row[0], row[1], row[2]]);
            }
        }
        for task in Task::ALL {
            let mut g = Vec::new();
            let mut p = Vec::new();
            for (id, rows) in &pooled {
                g.push(gold[id].get(task));
                let sum: f64 = rows.iter().map(|r| r[task.index()]).sum();
                let all_equal = rows.iter().all(|r| r[task.index()] == rows[0][task.index()]);
                p.push(if all_equal { rows[0][task.index()] } else { sum / rows.len() as f64 });
            }
            let (best, k) = rescan(|t| oracle_task_f1(&g, &p, t));
            assert!((per_class.scores[task.index()] - best).abs() < 1e-12, "case {case}");
            assert_eq!(per_class.values()[task.index()], k as f64 / 40.0);
        }
    }
}

#[test]
fn separated_probabilities_reach_f1_one() {
    let ids: Vec<u64> = (0..6).collect();
    let rows = [[0.05, 0.2, 0.3], [0.9, 0.7, 0.8], [0.1, 0.25, 0.31], [0.95, 0.6, 0.77], [0.2, 0.1, 0.1], [0.8, 0.9, 0.9]];
    let t = multi_table("m", &ids, &rows);
    let gold: HashMap<u64, LabelSet> = ids.iter().map(|&i| (i, LabelSet([i % 2 == 1; 3]))).collect();
    for c in [Criterion::Macro, Criterion::PerClass] {
        assert_eq!(select_thresholds(&[&t], &gold, GRID_STEP, c).unwrap().scores, [1.0; 3]);
    }
}

#[test]
fn singlelabel_argmax_equals_half_rule() {
    let mut r = rng(23);
    for case in 0..1000 {
        let n = r.gen_range(1..20);
        let ids: Vec<u64> = (0..n).collect();
        let mut averaged = Vec::new();
        let mut expected = vec![LabelSet::default(); n as usize];
        for task in Task::ALL {
            let members: Vec<ProbabilityTable> = (0..r.gen_range(1..6))
                .map(|k| {
                    let mut t = ProbabilityTable::new(format!("{task}{k}"), Layout::SingleLabel(task));
                    for &i in &ids {
                        let p = if case % 2 == 0 { r.gen_range(0..=4) as f64 / 4.0 } else { r.gen() };
                        t.push(i, &[p]);
                    }
                    t
                })
                .collect();
            for i in 0..n as usize {
                let pos: f64 = members.iter().map(|m| m.probs[i]).sum::<f64>() / members.len() as f64;
                let neg: f64 = members.iter().map(|m| 1.0 - m.probs[i]).sum::<f64>() / members.len() as f64;
                // argmax over (negative, positive), ties to positive
                expected[i].set(task, pos >= neg);
            }
            averaged.push(soft_vote(&members.iter().collect::<Vec<_>>()).unwrap());
        }
        let refs: Vec<&ProbabilityTable> = averaged.iter().collect();
        let labels = predict_singlelabel(&refs).unwrap();
        for (i, l) in labels.iter().enumerate() {
            for task in Task::ALL {
                assert_eq!(l.get(task), averaged[task.index()].probs[i] >= 0.5);
            }
        }
        assert_eq!(labels, expected, "case {case}");
    }
}

#[test]
fn three_member_ensemble_by_hand() {
    // toxic: member values are exact binary fractions so the averages are exact
    let toxic = [
        [0.875, 0.75, 0.625], // avg 0.75  -> 1, gold 1: tp
        [0.5, 0.25, 0.375],   // avg 0.375 -> 0, gold 1: fn
        [0.25, 0.25, 0.25],   // 0.25 -> 0, gold 0: tn
        [0.75, 0.5, 0.25],    // exactly 0.5 -> 1 (p >= t), gold 0: fp
        [0.125, 0.125, 0.5],  // 0.25 -> 0: tn
        [1.0, 0.5, 0.0],      // 0.5 -> 1, gold 1: tp
    ];
    let mut m = [vec![], vec![], vec![]];
    let mut gold = Vec::new();
    for s in 0..12 {
        let t = if s < 6 { toxic[s] } else { [0.0, 0.0, 0.375] }; // avg 0.125: tn
        // engaging: perfectly predicted; fact: always predicted, 3 positives
        let e = if s % 3 == 0 { [0.75, 0.5, 1.0] } else { [0.25, 0.5, 0.0] };
        let f = [0.625, 0.5, 0.875];
        for k in 0..3 {
            m[k].push([t[k], e[k], f[k]]);
        }
        gold.push(LabelSet::new([0, 1, 5].contains(&s), s % 3 == 0, s < 3));
    }
    let ids: Vec<u64> = (100..112).collect();
    let a = multi_table("a", &ids, &m[0]);
    let b = multi_table("b", &ids, &m[1]);
    // third member stored in reverse sample order
    let rev_ids: Vec<u64> = ids.iter().rev().copied().collect();
    let rev_rows: Vec<[f64; 3]> = m[2].iter().rev().copied().collect();
    let c = multi_table("c", &rev_ids, &rev_rows);
    let gold: HashMap<u64, LabelSet> = ids.iter().copied().zip(gold).collect();

    let opts = EnsembleOptions {
        thresholds: ThresholdMode::Fixed(0.5),
        ..EnsembleOptions::default()
    };
    let (report, pred) = evaluate_ensemble(&[&a, &b, &c], &[], &HashMap::new(), &gold, &opts).unwrap();
    assert_eq!(pred.sample_ids, ids);
    assert_eq!(report.confusion[0], ConfusionMatrix { tp: 2, fp: 1, fn_: 1, tn: 8 });
    assert_eq!(report.confusion[1], ConfusionMatrix { tp: 4, fp: 0, fn_: 0, tn: 8 });
    assert_eq!(report.confusion[2], ConfusionMatrix { tp: 3, fp: 9, fn_: 0, tn: 0 });
    // toxic: P = R = (2/3 + 8/9) / 2 = 7/9
    assert!((report.f1_toxic - 7.0 / 9.0).abs() < 1e-15);
    assert_eq!(report.f1_engaging, 1.0);
    // fact: P = (3/12 + 0) / 2, R = (1 + 0) / 2, F1 = 1/5
    assert!((report.f1_fact - 0.2).abs() < 1e-15);
    assert!((report.macro_f1 - (7.0 / 9.0 + 1.0 + 0.2) / 3.0).abs() < 1e-15);

    let (solo, _) = evaluate_ensemble(&[&a], &[&a], &gold, &gold, &EnsembleOptions::default()).unwrap();
    let (dup, _) = evaluate_ensemble(&[&a, &a, &a], &[&a, &a, &a], &gold, &gold, &EnsembleOptions::default()).unwrap();
    assert_eq!(solo, dup);
}
