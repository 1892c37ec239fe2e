//! Optimization loop: step-decayed Adam on label-smoothed cross-entropy,
//! plus evaluation reports and their CSV files.

mod config;
mod loss;
mod optim;
mod report;
mod trainer;

pub use config::{lr_at_epoch, TrainConfig};
pub use loss::{smoothed_ce_loss, smoothed_target};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use report::{read_predictions_csv, write_epoch_log_csv, write_predictions_csv, EvalReport, Prediction};
pub use trainer::{
    argmax, batch_gradients, evaluate, evaluate_samples, prepare, train, train_samples, EpochLog, Sample,
    TrainOutcome,
};
