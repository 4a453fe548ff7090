//! A desk-scale stand-in for fine-tuned transformers: a linear classifier on
//! hashed character n-grams, trained with AdamW under a warmup schedule and
//! patience-based early stopping.

mod features;
mod model;
mod optim;
pub mod pool;
mod train;

pub use features::{FeatureVector, FeaturizerConfig};
pub use model::{Example, HeadKind, LinearModel, CLAMP};
pub use optim::{learning_rate, AdamW, AdamWConfig, AfterWarmup};
pub use pool::{train_pool, Pool, PoolConfig, PoolHead, PoolMember};
pub use train::{
    early_stop_score, train, EarlyStopping, EvalRecord, TrainConfig, TrainLog, UpdateRecord,
    Verdict, TRANSFORMER_LEARNING_RATE,
};
