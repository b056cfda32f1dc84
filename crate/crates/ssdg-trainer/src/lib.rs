//! Training: the labeled / strong-view / style-view losses, pseudo-label
//! thresholding, the SGD-with-momentum optimizer with cosine-annealed
//! two-group learning rates, and the baseline methods (vanilla, entropy
//! minimization, mean teacher, FixMatch) next to the StyleMatch variants.

mod config;
mod loss;
mod optimizer;
mod state;

use thiserror::Error;

pub use config::{Method, TrainConfig};
pub use loss::{
    cross_entropy_mean, entropy_mean, make_pseudo_label, masked_cross_entropy, softmax_backward,
    total_loss, PseudoLabel, StepLosses,
};
pub use optimizer::{ema_update, lr_schedule, SgdState};
pub use state::{
    compute_input_stats, evaluate, run_training, train_step, training_stream_seed,
    PseudoLabelDiag, StepOutput, TrainState,
};

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("probability vector not normalized (|sum - 1| = {0})")]
    NotNormalized(f32),
    #[error("non-finite loss at step {step}: labeled={labeled} strong={strong} style={style} aux={aux}")]
    NonFiniteLoss {
        step: u64,
        labeled: f32,
        strong: f32,
        style: f32,
        aux: f32,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("step {step} out of range (total {total})")]
    StepOutOfRange { step: u64, total: u64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ssdg_model::ModelError),
    #[error(transparent)]
    Augment(#[from] ssdg_augment::AugmentError),
    #[error(transparent)]
    Data(#[from] ssdg_data::DataError),
}
