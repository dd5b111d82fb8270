//! Training loop, batch cost, evaluation harness and gradient checking.

mod config;
mod cost;
mod eval;
mod gradcheck;
mod run;

pub use config::TrainConfig;
pub use cost::{batch_cost, BatchCost};
pub use eval::{evaluate, predict_dataset, score_predictions, Evaluation, RecordingPredictions};
pub use gradcheck::{grad_check, grad_check_with, GradCheckConfig, GradCheckReport, TensorCheck};
pub use run::{
    train_from, train_loop, train_step, BestRecord, TrainLogEntry, TrainOutcome, BEST_CHECKPOINT, BEST_RECORD,
    LATEST_CHECKPOINT, TRAIN_LOG,
};
