//! The multi-head predictor, its training loop and the comparison methods:
//! pooled ERM, uniform head averaging and relation-reweighted fine-tuning.

mod checkpoint;
mod config;
mod erm;
mod eval;
mod multihead;
mod train;

pub use checkpoint::{Checkpoint, TrainedModel, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{Combine, FixedKind, RelationMode, TrainConfig};
pub use erm::{finetune, rw_finetune, train_erm, ErmModel};
pub use eval::{domain_metric, evaluate, evaluate_d3g, evaluate_erm, evaluate_uniform, DomainMetric, Metric, MetricsReport};
pub use multihead::{LossParts, ModelGrads, MultiHeadModel};
pub use train::{train, train_from, EpochRecord, TrainOutcome};
