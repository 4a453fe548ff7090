use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::FeaturizerConfig;
use super::model::{Example, HeadKind, LinearModel};
use super::optim::{learning_rate, AdamW, AdamWConfig, AfterWarmup};
use crate::metrics::{evaluate, germeval_f1, ConfusionMatrix};
use crate::{seed, Error, LabelSet, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub after_warmup: AfterWarmup,
    pub eval_every_updates: usize,
    pub patience_evals: usize,
    pub optimizer: AdamWConfig,
    pub features: FeaturizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 24,
            epochs: 10,
            learning_rate: 0.05,
            warmup_fraction: 0.3,
            after_warmup: AfterWarmup::Constant,
            eval_every_updates: 40,
            patience_evals: 2,
            optimizer: AdamWConfig::default(),
            features: FeaturizerConfig::default(),
        }
    }
}

/// Learning rate used for fine-tuning the transformer models whose
/// probabilities are ingested from outside. Too small for the linear model.
pub const TRANSFORMER_LEARNING_RATE: f64 = 5e-6;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("eval_every_updates", self.eval_every_updates),
            ("patience_evals", self.patience_evals),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be positive")));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::config("warmup_fraction must lie in (0, 1)"));
        }
        if self.optimizer.weight_decay < 0.0 {
            return Err(Error::config("weight_decay must not be negative"));
        }
        Ok(())
    }
}

/// Patience-based stopping on a score that should increase.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    since_best: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// New best score; snapshot the model.
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            since_best: 0,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Only a strictly larger score counts as an improvement.
    pub fn observe(&mut self, score: f64) -> Verdict {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.since_best = 0;
            Verdict::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub learning_rate: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub update: usize,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub total_updates: usize,
    pub updates: Vec<UpdateRecord>,
    pub evals: Vec<EvalRecord>,
    pub best_update: usize,
    pub best_score: f64,
    pub stopped_early: bool,
}

/// Early-stopping score: macro-F1 at 0.5 thresholds for multi-label models,
/// the bound task's F1 for single-label models.
pub fn early_stop_score(model: &LinearModel, data: &[Example]) -> f64 {
    match model.head {
        HeadKind::MultiLabel => {
            let gold: Vec<LabelSet> = data.iter().map(|e| e.labels).collect();
            let pred: Vec<LabelSet> = data.iter().map(|e| model.decide(e.features)).collect();
            evaluate(&gold, &pred).map_or(0.0, |r| r.macro_f1)
        }
        HeadKind::SingleLabel(task) => {
            let mut m = ConfusionMatrix::default();
            for e in data {
                m.record(e.labels.get(task), model.decide(e.features).get(task));
            }
            germeval_f1(&m)
        }
    }
}

/// Trains one model with AdamW and patience-based early stopping, returning
/// the snapshot with the best early-stopping score.
///
/// The model is evaluated every `eval_every_updates` updates and once more
/// after the final update if that one was not already an evaluation point.
pub fn train(
    train_set: &[Example],
    early_stop: &[Example],
    config: &TrainConfig,
    head: HeadKind,
    seed: u64,
) -> Result<(LinearModel, TrainLog)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if early_stop.is_empty() {
        return Err(Error::config("early-stopping set is empty"));
    }

    let mut model = LinearModel::init(head, config.features, seed);
    let mut opt = AdamW::new(config.optimizer, model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let mut rng = seed::stream(seed, &[0x5b0f]);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let per_epoch = train_set.len().div_ceil(config.batch_size);
    let total = per_epoch * config.epochs;

    let mut log = TrainLog {
        total_updates: total,
        ..TrainLog::default()
    };
    let mut stopper = EarlyStopping::new(config.patience_evals);
    let mut best = model.clone();
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut t = 0;
    let mut last_eval = 0;

    let mut check = |model: &LinearModel, t: usize, log: &mut TrainLog, best: &mut LinearModel| {
        let score = early_stop_score(model, early_stop);
        log.evals.push(EvalRecord { update: t, score });
        let verdict = stopper.observe(score);
        if verdict == Verdict::Improved {
            *best = model.clone();
            log.best_update = t;
            log.best_score = score;
        }
        verdict
    };

    'epochs: for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            t += 1;
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i]));
            let loss = model.loss_and_gradient_into(&batch, &mut grad);
            let lr = learning_rate(
                config.learning_rate,
                config.warmup_fraction,
                config.after_warmup,
                t,
                total,
            );
            opt.step(&mut model.params, &grad, lr, t)?;
            log.updates.push(UpdateRecord {
                update: t,
                learning_rate: lr,
                loss,
            });
            if t % config.eval_every_updates == 0 {
                last_eval = t;
                if check(&model, t, &mut log, &mut best) == Verdict::Stop {
                    log.stopped_early = true;
                    break 'epochs;
                }
            }
        }
    }
    if last_eval != t {
        check(&model, t, &mut log, &mut best);
    }
    Ok((best, log))
}
