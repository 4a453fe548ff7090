//! Ensemble classification of toxic, engaging and fact-claiming comments.
//!
//! The crate covers the whole evaluation pipeline:
//!
//! - [`corpus`]: loading, deduplication, text preprocessing and fold plans
//! - [`metrics`]: the shared-task F1 (averaged precision/recall over both classes)
//!   and its macro average over the three tasks
//! - [`baseline`]: a hashed character n-gram linear classifier trained with AdamW
//!   and patience-based early stopping
//! - [`table`]: probability tables, the interchange format between models
//!   (including externally trained ones) and the ensembling stages
//! - [`ensemble`]: soft voting, threshold calibration and label prediction
//! - [`bootstrap`]: ensemble-size experiments over a trained pool
//! - [`plot`]: SVG rendering of bootstrap summaries

pub mod baseline;
pub mod bootstrap;
pub mod corpus;
pub mod ensemble;
mod error;
mod labels;
pub mod metrics;
pub mod plot;
pub mod seed;
pub mod table;

pub use error::{Error, Result};
pub use labels::{LabelSet, Task};

pub use baseline::{HeadKind, LinearModel, TrainConfig};
pub use bootstrap::{BootstrapConfig, BootstrapSummary, Composition};
pub use corpus::{Comment, Dataset, FoldPlan, Schema};
pub use ensemble::{Criterion, Thresholds};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use table::{Layout, ProbabilityTable};
