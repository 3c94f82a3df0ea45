//! Training loop, learning-rate schedule and evaluation.

mod eval;
mod metrics;
mod schedule;
mod trainer;

pub use eval::{evaluate, EvalReport, GroupMetrics, ScoredPair, COMBINED};
pub use metrics::{pairwise_sum, pearson, rmse};
pub use schedule::{decayed, PlateauScheduler};
pub use trainer::{predict_set, train, write_epoch_log, EpochLog, TrainConfig};
