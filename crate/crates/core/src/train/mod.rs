//! Losses, the mini-batch training loop, grid search and the metric suite.

pub mod config;
pub mod evaluate;
pub mod gradcheck;
pub mod grid;
pub mod loss;
pub mod metrics;
pub mod probe;
pub mod trainer;

pub use config::{Grid, TrainConfig};
pub use evaluate::{evaluate, evaluate_split, selection_metric, EvalSplit, MetricReport};
pub use gradcheck::check_objective_gradients;
pub use grid::{grid_search, grid_search_with, GridOutcome, LeaderboardRow};
pub use loss::{loss_ranking, loss_rating};
pub use metrics::{auc, auc_f1, f1, hit_ndcg, metric_topk, rank_of, rmse_mae};
pub use probe::{probe_auc, ProbeConfig, ProbeReport};
pub use trainer::{train, train_model, train_with, EpochRecord, TrainOutcome};
