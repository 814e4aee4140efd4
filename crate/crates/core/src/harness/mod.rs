//! Synthetic multichannel-signal to joint-angle regression, used to compare
//! aCAM-similarity attention against the scaled dot-product baseline.

mod model;
mod task;
mod train;

pub use model::{Model, ModelGrads, Similarity};
pub use task::{Dataset, Sample, SyntheticTaskSpec};
pub use train::{
    batch_gradient, constant_mean_mae, evaluate, init_model, train, EpochLog, EvalMode, EvalReport,
    ModelCheckpoint, ModelSpec, TrainOutcome,
};
