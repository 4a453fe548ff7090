use germeval_core::corpus::synthetic::{generate, SyntheticConfig};
use germeval_core::corpus::{clean, deduplicate, load_dataset, make_fold_plan, preprocess, write_dataset};
use germeval_core::{FoldPlan, Schema};

#[test]
fn preprocessing_chain_example() {
    assert_eq!(preprocess("A K T U E L L !  super☕", 200), "AKTUELL! super ☕");
    assert_eq!(preprocess("coffee☕☕☕", 200), "coffee ☕ ☕ ☕");
    assert_eq!(preprocess("ab c d e fg", 200), "ab cde fg");
}

#[test]
fn synthetic_corpus_survives_the_file_round_trip() {
    let data = generate(&SyntheticConfig { size: 300, duplicates: 12, ..SyntheticConfig::default() });
    assert_eq!(data.len(), 312);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");
    write_dataset(&path, &data, &Schema::default()).unwrap();
    let loaded = load_dataset(&path, &Schema::default()).unwrap();
    assert_eq!(loaded.comments, data.comments);

    let (cleaned, stats) = clean(&loaded, 200);
    assert_eq!((stats.input, stats.after_dedup, stats.duplicates), (312, 300, 12));
    assert_eq!(deduplicate(&cleaned).len(), cleaned.len());
    // cleaning is idempotent as a whole
    let (again, stats2) = clean(&cleaned, 200);
    assert_eq!(again.comments, cleaned.comments);
    assert_eq!(stats2.duplicates, 0);
}

#[test]
fn synthetic_label_rates_resemble_the_shared_task() {
    let data = generate(&SyntheticConfig::default());
    let n = data.len() as f64;
    let rate = |k: usize| data.comments.iter().filter(|c| c.labels.unwrap().0[k]).count() as f64 / n;
    assert!((0.25..0.45).contains(&rate(0)));
    assert!((0.18..0.36).contains(&rate(1)));
    assert!((0.25..0.45).contains(&rate(2)));
    assert_eq!(generate(&SyntheticConfig::default()).comments, data.comments);
}

#[test]
fn fold_plan_file_replays_the_split() {
    let plan = make_fold_plan(3226, 5, 0.1, 17).unwrap();
    let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
    assert_eq!(sizes, [646, 645, 645, 645, 645]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("folds.json");
    plan.save(&path).unwrap();
    assert_eq!(FoldPlan::load(&path).unwrap(), plan);
    assert!(make_fold_plan(4, 5, 0.1, 1).is_err());
}
