//! Sampled-softmax training of the scorer.

pub mod adam;
pub mod config;
pub mod loss;
pub mod sampler;
pub mod trainer;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use config::{DistractorMode, TrainConfig};
pub use loss::{backward, batch_objective, cs_loss, nll_loss, total_loss, CastRows, RowSource, TrainExample};
pub use sampler::sample_distractors;
pub use trainer::{train, DistractorSampler, LogRecord, TrainOutcome, TrainingLog, Validation};
