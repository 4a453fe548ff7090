mod common;

use std::collections::HashSet;

use common::rng;
use germeval_core::baseline::{
    learning_rate, train, train_pool, AfterWarmup, Example, FeatureVector, FeaturizerConfig, HeadKind,
    LinearModel, Pool, PoolConfig, PoolHead, TrainConfig,
};
use germeval_core::corpus::make_fold_plan;
use germeval_core::corpus::synthetic::{generate, SyntheticConfig};
use germeval_core::{LabelSet, Task};
use rand::Rng;

const SMALL: FeaturizerConfig = FeaturizerConfig {
    n_min: 1,
    n_max: 2,
    buckets: 16,
};

fn random_text(r: &mut impl Rng) -> String {
    let len = r.gen_range(2..12);
    (0..len).map(|_| (b'a' + r.gen_range(0..5u8)) as char).collect()
}

fn heads() -> [HeadKind; 4] {
    [
        HeadKind::MultiLabel,
        HeadKind::SingleLabel(Task::Toxic),
        HeadKind::SingleLabel(Task::Engaging),
        HeadKind::SingleLabel(Task::Fact),
    ]
}

#[test]
fn gradients_match_central_differences() {
    let mut r = rng(10);
    let h = 1e-4;
    for case in 0..50 {
        let head = heads()[case % 4];
        let mut model = LinearModel::zeros(head, SMALL);
        model.params.iter_mut().for_each(|p| *p = r.gen_range(-1.0..1.0));
        let feats: Vec<FeatureVector> = (0..r.gen_range(1..6)).map(|_| SMALL.featurize(&random_text(&mut r))).collect();
        let batch: Vec<Example> = feats
            .iter()
            .map(|f| Example {
                features: f,
                labels: LabelSet::new(r.gen(), r.gen(), r.gen()),
            })
            .collect();
        let (_, analytic) = model.loss_and_gradient(&batch);
        let mut numeric = vec![0.0; analytic.len()];
        for i in 0..model.params.len() {
            let keep = model.params[i];
            model.params[i] = keep + h;
            let up = model.loss(&batch);
            model.params[i] = keep - h;
            let down = model.loss(&batch);
            model.params[i] = keep;
            numeric[i] = (up - down) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric));
        assert!(rel < 1e-5, "case {case} ({head:?}): relative error {rel}");
    }
}

#[test]
fn zero_weights_give_ln2_and_half_probabilities() {
    let f = SMALL.featurize("hallo welt");
    for head in heads() {
        let model = LinearModel::zeros(head, SMALL);
        let batch = [Example { features: &f, labels: LabelSet::new(true, false, true) }];
        assert!((model.loss(&batch) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(model.predict_one(&f).iter().all(|&p| p == 0.5));
    }
}

#[test]
fn single_label_outputs_sum_to_one() {
    let mut r = rng(11);
    for head in &heads()[1..] {
        let model = LinearModel::init(*head, SMALL, r.gen());
        let mut model = model;
        model.params.iter_mut().for_each(|p| *p *= 40.0);
        for _ in 0..200 {
            let p = model.predict_one(&SMALL.featurize(&random_text(&mut r)));
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
        }
    }
}

/// Each task is carried by one marker word; everything else is filler.
fn separable(n: usize, offset: usize) -> Vec<(String, LabelSet)> {
    (0..n)
        .map(|i| {
            let k = i + offset;
            let l = LabelSet::new(k % 2 == 0, k % 3 == 0, k % 5 < 2);
            let mut words = vec!["text"];
            if l.0[0] {
                words.push("qqqq");
            }
            if l.0[1] {
                words.push("wwww");
            }
            if l.0[2] {
                words.push("zzzz");
            }
            (words.join(" "), l)
        })
        .collect()
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        epochs: 60,
        learning_rate: 0.5,
        eval_every_updates: 15,
        features: FeaturizerConfig { n_min: 2, n_max: 4, buckets: 1 << 10 },
        ..TrainConfig::default()
    }
}

#[test]
fn separable_toy_set_is_learned_and_training_stops() {
    let cfg = toy_config();
    let train_raw = separable(20, 0);
    let es_raw = separable(10, 20);
    let tf: Vec<FeatureVector> = train_raw.iter().map(|(t, _)| cfg.features.featurize(t)).collect();
    let ef: Vec<FeatureVector> = es_raw.iter().map(|(t, _)| cfg.features.featurize(t)).collect();
    let train_set: Vec<Example> = tf.iter().zip(&train_raw).map(|(f, (_, l))| Example { features: f, labels: *l }).collect();
    let es_set: Vec<Example> = ef.iter().zip(&es_raw).map(|(f, (_, l))| Example { features: f, labels: *l }).collect();
    for head in heads() {
        let (model, log) = train(&train_set, &es_set, &cfg, head, 5).unwrap();
        assert_eq!(log.best_score, 1.0, "{head:?} {:?}", log.evals);
        assert!(log.stopped_early, "{head:?} ran {} updates", log.updates.len());
        assert!(log.updates.len() < log.total_updates);
        // the returned snapshot is the best one, and nothing evaluated scored higher
        assert!(log.evals.iter().all(|e| e.score <= log.best_score));
        assert_eq!(germeval_core::baseline::early_stop_score(&model, &es_set), 1.0);
        // patience 2: exactly two evaluations after the last improvement
        let best_at = log.evals.iter().position(|e| e.update == log.best_update).unwrap();
        assert_eq!(log.evals.len(), best_at + 3);
    }
}

#[test]
fn warmup_schedule_is_visible_in_the_log() {
    let cfg = TrainConfig { epochs: 3, eval_every_updates: 1000, ..toy_config() };
    let raw = separable(40, 0);
    let f: Vec<FeatureVector> = raw.iter().map(|(t, _)| cfg.features.featurize(t)).collect();
    let ex: Vec<Example> = f.iter().zip(&raw).map(|(f, (_, l))| Example { features: f, labels: *l }).collect();
    let (_, log) = train(&ex[..30], &ex[30..], &cfg, HeadKind::MultiLabel, 1).unwrap();
    assert_eq!(log.total_updates, 3 * 30usize.div_ceil(4));
    assert_eq!(log.updates.len(), log.total_updates);
    let w = 0.3 * log.total_updates as f64;
    for u in &log.updates {
        let t = u.update as f64;
        let expect = if t <= w { cfg.learning_rate * t / w } else { cfg.learning_rate };
        assert!((u.learning_rate - expect).abs() <= 1e-15 * cfg.learning_rate, "update {}", u.update);
    }
    assert_eq!(learning_rate(1.0, 0.5, AfterWarmup::LinearDecay, 10, 10), 0.0);
    assert_eq!(learning_rate(1.0, 0.5, AfterWarmup::LinearDecay, 5, 10), 1.0);
}

#[test]
fn same_seed_gives_identical_model() {
    let cfg = toy_config();
    let raw = separable(30, 3);
    let f: Vec<FeatureVector> = raw.iter().map(|(t, _)| cfg.features.featurize(t)).collect();
    let ex: Vec<Example> = f.iter().zip(&raw).map(|(f, (_, l))| Example { features: f, labels: *l }).collect();
    let (a, la) = train(&ex[..20], &ex[20..], &cfg, HeadKind::MultiLabel, 9).unwrap();
    let (b, lb) = train(&ex[..20], &ex[20..], &cfg, HeadKind::MultiLabel, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    let (c, _) = train(&ex[..20], &ex[20..], &cfg, HeadKind::MultiLabel, 10).unwrap();
    assert_ne!(a.params, c.params);
    assert!(train(&ex[..20], &[], &cfg, HeadKind::MultiLabel, 9).is_err());
}

#[test]
fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let model = LinearModel::init(HeadKind::SingleLabel(Task::Fact), SMALL, 77);
    model.save(&path).unwrap();
    assert_eq!(LinearModel::load(&path).unwrap(), model);
}

fn pool_config(count: usize, head: PoolHead) -> PoolConfig {
    PoolConfig {
        count,
        head,
        seed: 3,
        train: TrainConfig {
            epochs: 2,
            features: FeaturizerConfig { n_min: 2, n_max: 3, buckets: 1 << 12 },
            ..TrainConfig::default()
        },
        ..PoolConfig::default()
    }
}

#[test]
fn pool_members_differ_and_pool_is_reproducible() {
    let data = generate(&SyntheticConfig { size: 200, ..SyntheticConfig::default() });
    let plan = make_fold_plan(data.len(), 5, 0.1, 1).unwrap();
    let cfg = pool_config(3, PoolHead::MultiLabel);
    let pool = train_pool(&data, Some(&plan), 0.1, &cfg).unwrap();
    assert_eq!(pool.len(), 15);
    let ids: HashSet<&str> = pool.members.iter().map(|m| m.id.as_str()).collect();
    assert_eq!(ids.len(), 15);
    for f in 0..5 {
        let fold: Vec<_> = pool.members.iter().filter(|m| m.fold == Some(f)).collect();
        assert_eq!(fold.len(), 3);
        let valid: HashSet<u64> = plan.folds[f].iter().map(|&i| data.comments[i].id).collect();
        for (i, a) in fold.iter().enumerate() {
            assert_eq!(a.valid.sample_ids.iter().copied().collect::<HashSet<_>>(), valid);
            assert_eq!(a.early_stop.len(), 16, "round(0.1 * 160)");
            assert!(a.early_stop.sample_ids.iter().all(|s| !valid.contains(s)));
            for b in &fold[i + 1..] {
                assert_ne!(a.seed, b.seed);
                assert_ne!(a.early_stop.sample_ids, b.early_stop.sample_ids);
            }
        }
    }
    let again = train_pool(&data, Some(&plan), 0.1, &cfg).unwrap();
    assert_eq!(pool, again);

    let dir = tempfile::tempdir().unwrap();
    pool.save(dir.path()).unwrap();
    assert_eq!(Pool::load(dir.path()).unwrap(), pool);
}

#[test]
fn single_label_pool_has_one_model_per_task() {
    let data = generate(&SyntheticConfig { size: 100, ..SyntheticConfig::default() });
    let plan = make_fold_plan(data.len(), 2, 0.1, 1).unwrap();
    let cfg = PoolConfig { keep_models: true, ..pool_config(2, PoolHead::SingleLabel) };
    let pool = train_pool(&data, Some(&plan), 0.1, &cfg).unwrap();
    assert_eq!(pool.len(), 2 * 2 * 3);
    for m in &pool.members {
        let model = m.model.as_ref().unwrap();
        assert_eq!(model.head.layout(), m.layout);
        assert!(m.valid.probs.iter().all(|p| (0.0..=1.0).contains(p)));
    }
    let dir = tempfile::tempdir().unwrap();
    pool.save(dir.path()).unwrap();
    assert_eq!(Pool::load(dir.path()).unwrap(), pool);
}
