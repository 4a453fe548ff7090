use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use germeval_core::baseline::{train_pool as train_models, FeaturizerConfig, FeatureVector, Pool, PoolConfig, PoolHead};
use germeval_core::baseline::pool::MANIFEST;
use germeval_core::bootstrap::{run_bootstrap, summarize, write_summary_csv, read_summary_csv};
use germeval_core::corpus::synthetic::{generate, SyntheticConfig};
use germeval_core::corpus::{clean, load_dataset, make_fold_plan, truncated_count, write_dataset, PreprocessStats, DEFAULT_MAX_TOKENS};
use germeval_core::ensemble::{cross_validate, evaluate_ensemble, predict_ensemble, write_answers, EnsembleSpec};
use germeval_core::metrics::EvalReport;
use germeval_core::plot::{render_svg, Series};
use germeval_core::table::{read_tables, write_tables};
use germeval_core::{BootstrapConfig, Composition, Dataset, FoldPlan, LabelSet, ProbabilityTable, Schema};
use serde_json::json;

use crate::config::{ensemble_options, parse_sizes, RunConfig, SchemaFlags};
use crate::manifest::{artifact, artifact_dir, Run};

const COMMENTS: &str = "comments.csv";
const FOLDS: &str = "folds.json";
const PREDICTIONS: &str = "predictions.csv";

fn need(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str, hint: &str) -> Result<PathBuf> {
    flag.or_else(|| configured.clone())
        .ok_or_else(|| anyhow!("no {what} given; {hint}"))
}

fn load_comments(path: &Path, schema: &Schema, producer: &str) -> Result<(PathBuf, Dataset)> {
    let file = artifact(path, COMMENTS, producer)?;
    let data = load_dataset(&file, schema).with_context(|| format!("cannot load {}", file.display()))?;
    Ok((file, data))
}

fn load_pools(paths: &[PathBuf]) -> Result<(Vec<PathBuf>, Pool)> {
    let mut pool = Pool::default();
    let mut dirs = Vec::new();
    for p in paths {
        let dir = artifact_dir(p, MANIFEST, "train-pool")?;
        let part = Pool::load(&dir).with_context(|| format!("cannot load pool {}", dir.display()))?;
        pool.extend(part)?;
        dirs.push(dir);
    }
    Ok((dirs, pool))
}

fn pool_paths(flag: Vec<PathBuf>, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if !flag.is_empty() {
        return Ok(flag);
    }
    match &cfg.paths.pool {
        Some(p) => Ok(vec![p.clone()]),
        None => bail!("no --pool given; run `germeval train-pool` and pass its output directory"),
    }
}

pub fn synth(cfg: &RunConfig, size: Option<usize>, duplicates: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let seed = cfg.seed(seed);
    let sc = SyntheticConfig {
        size: size.unwrap_or(1000),
        duplicates: duplicates.unwrap_or(0),
        seed,
    };
    let params = json!({ "size": sc.size, "duplicates": sc.duplicates, "schema": cfg.schema });
    let mut run = Run::start("synth", Some(seed), params, &[], out.as_deref(), &cfg.runs_dir())?;
    let data = generate(&sc);
    let path = run.output(COMMENTS);
    write_dataset(&path, &data, &cfg.schema)?;
    if load_dataset(&path, &cfg.schema)?.comments != data.comments {
        bail!("{} does not read back identically", path.display());
    }
    println!("wrote {} comments to {}", data.len(), path.display());
    run.finish()?;
    Ok(())
}

pub fn preprocess(
    cfg: &RunConfig,
    input: Option<PathBuf>,
    max_tokens: Option<usize>,
    keep_duplicates: bool,
    schema: &SchemaFlags,
    out: Option<PathBuf>,
) -> Result<()> {
    let schema = schema.resolve(&cfg.schema);
    let input = need(input, &cfg.paths.data, "--input", "pass the raw comment file")?;
    let (file, raw) = load_comments(&input, &schema, "synth")?;
    let max_tokens = max_tokens.or(cfg.preprocess.max_tokens).unwrap_or(DEFAULT_MAX_TOKENS);
    if max_tokens == 0 {
        bail!("--max-tokens must be at least 1");
    }
    let params = json!({ "max_tokens": max_tokens, "keep_duplicates": keep_duplicates, "schema": schema });
    let mut run = Run::start("preprocess", None, params, &[("input", &file)], out.as_deref(), &cfg.runs_dir())?;

    let (cleaned, stats) = if keep_duplicates {
        let stats = PreprocessStats {
            input: raw.len(),
            after_dedup: raw.len(),
            duplicates: 0,
            empty: 0,
            truncated: truncated_count(&raw, max_tokens),
            max_tokens,
        };
        (raw.preprocessed(max_tokens), stats)
    } else {
        clean(&raw, max_tokens)
    };
    let path = run.output(COMMENTS);
    write_dataset(&path, &cleaned, &schema)?;
    let back = load_dataset(&path, &schema)?;
    if back.len() != cleaned.len() {
        bail!("{} holds {} comments, expected {}", path.display(), back.len(), cleaned.len());
    }
    let stats_path = run.output("stats.json");
    fs::write(&stats_path, serde_json::to_string_pretty(&stats)? + "\n")?;

    println!("{} → {} after dedup ({} duplicates removed)", stats.input, stats.after_dedup, stats.duplicates);
    println!("{} of {} comments truncated at {} whitespace tokens", stats.truncated, stats.after_dedup, max_tokens);
    if stats.empty > 0 {
        println!("{} comments dropped as empty", stats.empty);
    }
    println!("wrote {}", path.display());
    run.finish()?;
    Ok(())
}

pub fn split(
    cfg: &RunConfig,
    data: Option<PathBuf>,
    k: Option<usize>,
    fraction: Option<f64>,
    seed: Option<u64>,
    schema: &SchemaFlags,
    out: Option<PathBuf>,
) -> Result<()> {
    let schema = schema.resolve(&cfg.schema);
    let data = need(data, &cfg.paths.data, "--data", "run `germeval preprocess` and pass its output")?;
    let (file, dataset) = load_comments(&data, &schema, "preprocess")?;
    let seed = cfg.seed(seed);
    let k = k.or(cfg.split.k).unwrap_or(5);
    let fraction = fraction.or(cfg.split.fraction).unwrap_or(0.1);
    let params = json!({ "k": k, "fraction": fraction });
    let mut run = Run::start("split", Some(seed), params, &[("data", &file)], out.as_deref(), &cfg.runs_dir())?;
    let plan = make_fold_plan(dataset.len(), k, fraction, seed)?;
    let path = run.output(FOLDS);
    plan.save(&path)?;
    if FoldPlan::load(&path)? != plan {
        bail!("{} does not read back identically", path.display());
    }
    let sizes: Vec<String> = plan.folds.iter().map(|f| f.len().to_string()).collect();
    println!("{} samples in {k} folds of sizes {}", dataset.len(), sizes.join(", "));
    println!("wrote {}", path.display());
    run.finish()?;
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct TrainPoolArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Fold plan written by `split` (file or run directory).
    #[arg(long)]
    folds: Option<PathBuf>,
    /// Train on all data instead of per fold (for test-set predictions).
    #[arg(long, conflicts_with = "folds")]
    all_data: bool,
    /// Models per fold (per task for single-label pools).
    #[arg(long)]
    count: Option<usize>,
    /// `multi-label` or `single-label`.
    #[arg(long)]
    head: Option<String>,
    /// Family name used to build mixed ensembles.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Early-stopping fraction when training on all data.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Hash buckets (a power of two is recommended).
    #[arg(long)]
    buckets: Option<usize>,
    /// Save model snapshots (needed by `predict`).
    #[arg(long)]
    keep_models: bool,
    #[command(flatten)]
    schema: SchemaFlags,
    #[command(flatten)]
    out: crate::OutArgs,
}

fn parse_head(s: &str) -> Result<PoolHead> {
    match s {
        "multi-label" => Ok(PoolHead::MultiLabel),
        "single-label" => Ok(PoolHead::SingleLabel),
        other => bail!("unknown head `{other}` (expected multi-label or single-label)"),
    }
}

pub fn train_pool(cfg: &RunConfig, a: TrainPoolArgs) -> Result<()> {
    let schema = a.schema.resolve(&cfg.schema);
    let data = need(a.data, &cfg.paths.data, "--data", "run `germeval preprocess` and pass its output")?;
    let (data_file, dataset) = load_comments(&data, &schema, "preprocess")?;
    let folds = match (a.folds.or_else(|| cfg.paths.folds.clone()), a.all_data) {
        (_, true) => None,
        (Some(p), false) => Some(artifact(&p, FOLDS, "split")?),
        (None, false) => bail!("no --folds given; run `germeval split` and pass its output, or use --all-data"),
    };
    let plan = folds.as_deref().map(FoldPlan::load).transpose()?;

    let mut train = cfg.train();
    train.epochs = a.epochs.unwrap_or(train.epochs);
    train.batch_size = a.batch_size.unwrap_or(train.batch_size);
    train.learning_rate = a.learning_rate.unwrap_or(train.learning_rate);
    train.warmup_fraction = a.warmup_fraction.unwrap_or(train.warmup_fraction);
    train.eval_every_updates = a.eval_every.unwrap_or(train.eval_every_updates);
    train.patience_evals = a.patience.unwrap_or(train.patience_evals);
    if let Some(b) = a.buckets {
        train.features = FeaturizerConfig { buckets: b, ..train.features };
    }
    let head = match a.head.as_deref() {
        Some(h) => parse_head(h)?,
        None => cfg.pool.head.unwrap_or(PoolHead::MultiLabel),
    };
    let seed = cfg.seed(a.seed);
    let pc = PoolConfig {
        count: a.count.or(cfg.pool.count).unwrap_or(30),
        head,
        family: a.family.or_else(|| cfg.pool.family.clone()).unwrap_or_else(|| "linear".into()),
        seed,
        train,
        keep_models: a.keep_models || cfg.pool.keep_models.unwrap_or(false),
    };
    let fraction = a.fraction.or(cfg.split.fraction).unwrap_or(0.1);
    let params = json!({ "pool": pc, "fraction": fraction, "all_data": plan.is_none() });
    let mut inputs: Vec<(&str, &Path)> = vec![("data", &data_file)];
    if let Some(f) = &folds {
        inputs.push(("folds", f));
    }
    let mut run = Run::start("train-pool", Some(seed), params, &inputs, a.out.out.as_deref(), &cfg.runs_dir())?;

    let pool = train_models(&dataset, plan.as_ref(), fraction, &pc)?;
    pool.save(&run.dir)?;
    let back = Pool::load(&run.dir)?;
    let same = back.members.len() == pool.members.len()
        && back.members.iter().zip(&pool.members).all(|(x, y)| x.id == y.id && x.valid == y.valid && x.early_stop == y.early_stop);
    if !same {
        bail!("pool in {} does not read back identically", run.dir.display());
    }
    run.output(MANIFEST);
    run.output("tables");
    if pc.keep_models {
        run.output("models");
    }

    let mut by_fold: Vec<(Option<usize>, Vec<f64>)> = Vec::new();
    for m in &pool.members {
        match by_fold.iter_mut().find(|(f, _)| *f == m.fold) {
            Some((_, v)) => v.push(m.best_score),
            None => by_fold.push((m.fold, vec![m.best_score])),
        }
    }
    for (fold, scores) in by_fold {
        let name = fold.map_or_else(|| "all data".to_owned(), |f| format!("fold {f}"));
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        println!("{name}: {} models, mean early-stopping score {mean:.3}", scores.len());
    }
    println!("wrote pool of {} models to {}", pool.len(), run.dir.display());
    run.finish()?;
    Ok(())
}

pub fn predict(
    cfg: &RunConfig,
    pool: Option<PathBuf>,
    data: Option<PathBuf>,
    fold: Option<String>,
    schema: &SchemaFlags,
    out: Option<PathBuf>,
) -> Result<()> {
    let schema = schema.resolve(&cfg.schema);
    let pool_dir = need(pool, &cfg.paths.pool, "--pool", "run `germeval train-pool --keep-models` and pass its output")?;
    let (dirs, pool) = load_pools(std::slice::from_ref(&pool_dir))?;
    let data = need(data, &cfg.paths.test_data, "--data", "run `germeval preprocess` on the data to label and pass its output")?;
    let (data_file, dataset) = load_comments(&data, &schema, "preprocess")?;
    let fold_filter: Option<Option<usize>> = match fold.as_deref() {
        None => None,
        Some("all") => Some(None),
        Some(f) => Some(Some(f.parse().with_context(|| format!("bad fold `{f}`"))?)),
    };
    let members: Vec<_> = pool
        .members
        .iter()
        .filter(|m| m.model.is_some())
        .filter(|m| fold_filter.is_none_or(|f| m.fold == f))
        .collect();
    if members.is_empty() {
        bail!(
            "pool {} has no saved models{}; rerun `germeval train-pool` with --keep-models",
            pool_dir.display(),
            fold.map(|f| format!(" for fold {f}")).unwrap_or_default()
        );
    }
    let params = json!({ "fold": fold_filter, "schema": schema });
    let mut run = Run::start("predict", None, params, &[("pool", &dirs[0]), ("data", &data_file)], out.as_deref(), &cfg.runs_dir())?;

    let mut cache: Vec<(FeaturizerConfig, Vec<FeatureVector>)> = Vec::new();
    let mut tables = Vec::with_capacity(members.len());
    for m in &members {
        let model = m.model.as_ref().expect("filtered");
        let k = match cache.iter().position(|(c, _)| *c == model.features) {
            Some(k) => k,
            None => {
                let feats = dataset.comments.iter().map(|c| model.features.featurize(&c.text)).collect();
                cache.push((model.features, feats));
                cache.len() - 1
            }
        };
        let rows = dataset.comments.iter().map(|c| c.id).zip(&cache[k].1);
        tables.push(model.predict_proba(&m.id, rows));
    }
    let path = run.output(PREDICTIONS);
    write_tables(&path, &tables.iter().collect::<Vec<_>>())?;
    if read_tables(&path)? != tables {
        bail!("{} does not read back identically", path.display());
    }
    println!("wrote predictions of {} models on {} comments to {}", tables.len(), dataset.len(), path.display());
    run.finish()?;
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct EnsembleEvalArgs {
    /// Pool directories; members and early-stopping predictions come from here. Repeatable.
    #[arg(long)]
    pool: Vec<PathBuf>,
    /// Labeled training data (gold labels for validation folds and calibration).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Probability file to ensemble (e.g. from `predict` or an external model).
    /// Without it, the pool is evaluated by cross-validation.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Early-stopping probabilities for externally produced predictions.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Comments the predictions refer to; scored when labeled.
    #[arg(long)]
    target: Option<PathBuf>,
    /// `macro`, `per-class` or `fixed:<t>`.
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Restrict members to these families.
    #[arg(long, value_delimiter = ',')]
    families: Vec<String>,
    /// Member slots to use, repeats allowed.
    #[arg(long, value_delimiter = ',')]
    slots: Vec<usize>,
    /// Model ids to use from the probability file.
    #[arg(long, value_delimiter = ',')]
    members: Vec<String>,
    #[command(flatten)]
    schema: SchemaFlags,
    #[command(flatten)]
    out: crate::OutArgs,
}

pub const REPORT_CSV_HEADER: [&str; 5] = ["row", "macro_f1", "f1_toxic", "f1_engaging", "f1_fact"];

fn write_report_csv(path: &Path, rows: &[(String, [f64; 4])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_CSV_HEADER)?;
    for (name, v) in rows {
        let mut rec = vec![name.clone()];
        rec.extend(v.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn scores(r: &EvalReport) -> [f64; 4] {
    [r.macro_f1, r.f1_toxic, r.f1_engaging, r.f1_fact]
}

pub fn ensemble_eval(cfg: &RunConfig, a: EnsembleEvalArgs) -> Result<()> {
    let schema = a.schema.resolve(&cfg.schema);
    let options = ensemble_options(&cfg.ensemble, a.thresholds.as_deref(), a.grid_step)?;
    let spec = EnsembleSpec {
        families: if a.families.is_empty() { cfg.ensemble.families.clone().unwrap_or_default() } else { a.families },
        slots: if a.slots.is_empty() { cfg.ensemble.slots.clone() } else { Some(a.slots) },
    };
    match a.predictions.or_else(|| cfg.paths.predictions.clone()) {
        None => {
            let pools = pool_paths(a.pool, cfg)?;
            let (dirs, pool) = load_pools(&pools)?;
            let data = need(a.data, &cfg.paths.data, "--data", "pass the preprocessed training data")?;
            let (data_file, dataset) = load_comments(&data, &schema, "preprocess")?;
            let mut inputs: Vec<(&str, &Path)> = dirs.iter().map(|d| ("pool", d.as_path())).collect();
            inputs.push(("data", &data_file));
            let params = json!({ "mode": "cross-validation", "options": options, "spec": spec });
            let mut run = Run::start("ensemble-eval", None, params, &inputs, a.out.out.as_deref(), &cfg.runs_dir())?;
            let cv = cross_validate(&pool, &spec, &dataset.gold(), &options)?;
            let report = run.output("report.json");
            fs::write(&report, serde_json::to_string_pretty(&json!({ "options": options, "cross_validation": cv }))? + "\n")?;
            let mut rows: Vec<(String, [f64; 4])> = cv.folds.iter().map(|f| (format!("fold{}", f.fold), scores(&f.report))).collect();
            rows.push(("mean".into(), cv.mean));
            rows.push(("std".into(), cv.std));
            write_report_csv(&run.output("report.csv"), &rows)?;
            println!("macro | toxic | engaging | fact");
            println!("{}", cv.summary_line());
            println!("wrote {}", report.display());
            run.finish()?;
        }
        Some(pred) => {
            let pred_file = artifact(&pred, PREDICTIONS, "predict")?;
            let mut targets = read_tables(&pred_file)?;
            if !a.members.is_empty() {
                if let Some(missing) = a.members.iter().find(|id| !targets.iter().any(|t| &t.model_id == *id)) {
                    bail!("model `{missing}` is not in {}", pred_file.display());
                }
                targets.retain(|t| a.members.contains(&t.model_id));
            }
            if targets.is_empty() {
                bail!("{} holds no predictions", pred_file.display());
            }

            let mut inputs: Vec<(String, PathBuf)> = vec![("predictions".into(), pred_file.clone())];
            let calibrate = matches!(options.thresholds, germeval_core::ensemble::ThresholdMode::Calibrated(_))
                && targets[0].layout == germeval_core::Layout::MultiLabel;
            let mut calibration: Vec<ProbabilityTable> = Vec::new();
            let mut calibration_gold: HashMap<u64, LabelSet> = HashMap::new();
            if calibrate {
                let available: Vec<ProbabilityTable> = match &a.calibration {
                    Some(c) => {
                        inputs.push(("calibration".into(), c.clone()));
                        read_tables(c)?
                    }
                    None => {
                        let (dirs, pool) = load_pools(&pool_paths(a.pool.clone(), cfg)?)?;
                        inputs.extend(dirs.into_iter().map(|d| ("pool".to_owned(), d)));
                        pool.members.into_iter().map(|m| m.early_stop).collect()
                    }
                };
                for t in &targets {
                    let c = available
                        .iter()
                        .find(|c| c.model_id == t.model_id)
                        .ok_or_else(|| anyhow!("no early-stopping predictions for model `{}`", t.model_id))?;
                    calibration.push(c.clone());
                }
                let data = need(a.data.clone(), &cfg.paths.data, "--data", "pass the preprocessed training data for threshold calibration")?;
                let (data_file, dataset) = load_comments(&data, &schema, "preprocess")?;
                inputs.push(("data".into(), data_file));
                calibration_gold = dataset.gold();
            }
            let target = match a.target.or_else(|| cfg.paths.test_data.clone()) {
                Some(t) => {
                    let (file, ds) = load_comments(&t, &schema, "preprocess")?;
                    inputs.push(("target".into(), file));
                    Some(ds)
                }
                None => None,
            };

            let input_refs: Vec<(&str, &Path)> = inputs.iter().map(|(r, p)| (r.as_str(), p.as_path())).collect();
            let members: Vec<&str> = targets.iter().map(|t| t.model_id.as_str()).collect();
            let params = json!({ "mode": "predictions", "options": options, "members": members });
            let mut run = Run::start("ensemble-eval", None, params, &input_refs, a.out.out.as_deref(), &cfg.runs_dir())?;

            let t_refs: Vec<&ProbabilityTable> = targets.iter().collect();
            let c_refs: Vec<&ProbabilityTable> = calibration.iter().collect();
            let labeled = target.as_ref().filter(|d| d.is_labeled());
            let (report, prediction) = match labeled {
                Some(d) => {
                    let (r, p) = evaluate_ensemble(&t_refs, &c_refs, &calibration_gold, &d.gold(), &options)?;
                    (Some(r), p)
                }
                None => (None, predict_ensemble(&t_refs, &c_refs, &calibration_gold, &options)?),
            };

            let names: HashMap<u64, String> = target
                .as_ref()
                .map(|d| d.comments.iter().map(|c| (c.id, c.source_id.clone().unwrap_or_else(|| c.id.to_string()))).collect())
                .unwrap_or_default();
            let ids: Vec<String> = prediction
                .sample_ids
                .iter()
                .map(|id| names.get(id).cloned().unwrap_or_else(|| id.to_string()))
                .collect();
            write_answers(&run.output("answers.csv"), &ids, &prediction.labels)?;
            let report_path = run.output("report.json");
            let body = json!({
                "options": options,
                "members": members,
                "thresholds": prediction.thresholds,
                "report": report,
            });
            fs::write(&report_path, serde_json::to_string_pretty(&body)? + "\n")?;
            if let Some(r) = &report {
                write_report_csv(&run.output("report.csv"), &[("test".into(), scores(r))])?;
                println!("macro | toxic | engaging | fact");
                println!("{}", r.summary_line());
            }
            println!("wrote answers for {} comments to {}", ids.len(), run.path("answers.csv").display());
            run.finish()?;
        }
    }
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct BootstrapArgs {
    /// Pool directories (several pools with different families can be mixed). Repeatable.
    #[arg(long)]
    pool: Vec<PathBuf>,
    /// Labeled training data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Ensemble sizes, e.g. `1,2,5,10` or `default`.
    #[arg(long)]
    sizes: Option<String>,
    /// Draws per size.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `name=family:weight,...`, a family name, or `all`. Repeatable.
    #[arg(long)]
    composition: Vec<String>,
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[command(flatten)]
    schema: SchemaFlags,
    #[command(flatten)]
    out: crate::OutArgs,
}

pub fn bootstrap(cfg: &RunConfig, a: BootstrapArgs) -> Result<()> {
    let schema = a.schema.resolve(&cfg.schema);
    let (dirs, pool) = load_pools(&pool_paths(a.pool, cfg)?)?;
    let data = need(a.data, &cfg.paths.data, "--data", "pass the preprocessed training data")?;
    let (data_file, dataset) = load_comments(&data, &schema, "preprocess")?;
    let options = ensemble_options(&cfg.ensemble, a.thresholds.as_deref(), a.grid_step)?;
    let sizes = match a.sizes {
        Some(s) => parse_sizes(&s)?,
        None => cfg.bootstrap.sizes.clone().unwrap_or_else(germeval_core::bootstrap::default_sizes),
    };
    let specs = if a.composition.is_empty() {
        cfg.bootstrap.compositions.clone().unwrap_or_else(|| vec!["all".into()])
    } else {
        a.composition
    };
    let compositions = specs.iter().map(|s| Composition::parse(s)).collect::<germeval_core::Result<Vec<_>>>()?;
    let mut names: Vec<&str> = compositions.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        bail!("composition names must be unique");
    }
    let seed = cfg.seed(a.seed);
    let samples = a.samples.or(cfg.bootstrap.samples_per_size).unwrap_or(1000);

    let mut inputs: Vec<(&str, &Path)> = dirs.iter().map(|d| ("pool", d.as_path())).collect();
    inputs.push(("data", &data_file));
    let params = json!({ "sizes": sizes, "samples_per_size": samples, "compositions": specs, "options": options });
    let mut run = Run::start("bootstrap", Some(seed), params, &inputs, a.out.out.as_deref(), &cfg.runs_dir())?;
    let gold = dataset.gold();
    for composition in compositions {
        let config = BootstrapConfig {
            sizes: sizes.clone(),
            samples_per_size: samples,
            seed,
            composition,
            ensemble: options,
        };
        let summary = run_bootstrap(&pool, &gold, &config)?;
        let name = &summary.composition.name;
        let rows = summarize(&summary);
        let csv_path = run.output(format!("{name}.summary.csv"));
        write_summary_csv(&csv_path, &rows)?;
        if read_summary_csv(&csv_path)? != rows {
            bail!("{} does not read back identically", csv_path.display());
        }
        let json_path = run.output(format!("{name}.bootstrap.json"));
        fs::write(&json_path, serde_json::to_string(&summary)? + "\n")?;
        println!("composition {name}:");
        println!("  size  mean   std");
        for r in &rows {
            println!("  {:>4}  {:.3}  {:.4}", r.size, r.mean_macro_f1, r.std_macro_f1);
        }
        println!("wrote {}", csv_path.display());
    }
    run.finish()?;
    Ok(())
}

/// Expands a `--summary` argument into named summary files.
fn summary_inputs(arg: &str) -> Result<Vec<(String, PathBuf)>> {
    let (name, path) = match arg.split_once('=') {
        Some((n, p)) => (Some(n.to_owned()), PathBuf::from(p)),
        None => (None, PathBuf::from(arg)),
    };
    let stem = |p: &Path| -> String {
        let s = p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        s.strip_suffix(".summary.csv").or_else(|| s.strip_suffix(".csv")).unwrap_or(&s).to_owned()
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.to_string_lossy().ends_with(".summary.csv"));
        files.sort();
        if files.is_empty() {
            bail!("no summary files in {}; run `germeval bootstrap` first", path.display());
        }
        if name.is_some() && files.len() > 1 {
            bail!("{} holds several summaries; name them one by one", path.display());
        }
        return Ok(files.into_iter().map(|f| (name.clone().unwrap_or_else(|| stem(&f)), f)).collect());
    }
    if !path.exists() {
        bail!("missing summary {}; run `germeval bootstrap` first", path.display());
    }
    Ok(vec![(name.unwrap_or_else(|| stem(&path)), path)])
}

pub fn plot(cfg: &RunConfig, summaries: &[String], band: Option<String>, title: &str, out: Option<PathBuf>) -> Result<()> {
    let mut files = Vec::new();
    for s in summaries {
        files.extend(summary_inputs(s)?);
    }
    let series = files
        .iter()
        .map(|(name, path)| Ok(Series { name: name.clone(), rows: read_summary_csv(path)? }))
        .collect::<Result<Vec<_>>>()?;
    let band_index = match &band {
        Some(b) => Some(
            series
                .iter()
                .position(|s| &s.name == b)
                .ok_or_else(|| anyhow!("no series named `{b}` to draw the band for"))?,
        ),
        None => Some(0),
    };
    let inputs: Vec<(&str, &Path)> = files.iter().map(|(n, p)| (n.as_str(), p.as_path())).collect();
    let params = json!({ "series": files.iter().map(|f| &f.0).collect::<Vec<_>>(), "band": band_index, "title": title });
    let mut run = Run::start("plot", None, params, &inputs, out.as_deref(), &cfg.runs_dir())?;
    let svg = render_svg(&series, band_index, title);
    let path = run.output("figure.svg");
    fs::write(&path, svg)?;
    println!("wrote {}", path.display());
    run.finish()?;
    Ok(())
}
