//! The feature extractor and the stochastic prototype classifier.
//!
//! The encoder is a small stride-2 convolutional network with instance
//! normalization, written directly against `ndarray` with explicit
//! forward/backward passes (im2col + GEMM). The classifier models each
//! class prototype as a Gaussian, sampled once per training step through
//! the reparameterization trick and collapsed to its mean at test time.

mod checkpoint;
mod classifier;
mod encoder;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, NamedTensors};
pub use classifier::{
    classify, cosine_scores, cosine_scores_backward, init_classifier, mean_prototypes,
    prototype_backward, sample_prototypes, softplus, softplus_derivative, CosineScores,
    StochasticClassifierParams,
};
pub use encoder::{
    encode, images_to_input, Encoder, EncoderCache, EncoderGrads, EncoderSpec,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("zero-norm vector: cosine similarity undefined ({0})")]
    ZeroNorm(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Encoder plus classifier: everything the trainer optimizes.
#[derive(Debug, Clone)]
pub struct Model {
    pub encoder: Encoder,
    pub classifier: StochasticClassifierParams,
}

impl Model {
    pub fn new(encoder: Encoder, classifier: StochasticClassifierParams) -> Result<Self, ModelError> {
        if encoder.spec.output_dim != classifier.feature_dim() {
            return Err(ModelError::ShapeMismatch(format!(
                "encoder output_dim {} != classifier D {}",
                encoder.spec.output_dim,
                classifier.feature_dim()
            )));
        }
        Ok(Self {
            encoder,
            classifier,
        })
    }

    /// Flattens every parameter into a named-tensor list (canonical
    /// checkpoint order).
    pub fn to_named_tensors(&self) -> NamedTensors {
        let mut tensors = self.encoder.to_named_tensors();
        tensors.push((
            "classifier.mu".into(),
            self.classifier.mu.shape().to_vec(),
            self.classifier.mu.iter().copied().collect(),
        ));
        tensors.push((
            "classifier.sigma_raw".into(),
            self.classifier.sigma_raw.shape().to_vec(),
            self.classifier.sigma_raw.iter().copied().collect(),
        ));
        tensors
    }

    /// Restores parameters from a named-tensor list produced by
    /// [`Model::to_named_tensors`] against a structurally identical model.
    pub fn load_named_tensors(&mut self, tensors: &NamedTensors) -> Result<(), ModelError> {
        for (name, shape, data) in tensors {
            if name == "classifier.mu" {
                copy_into(&mut self.classifier.mu, name, shape, data)?;
            } else if name == "classifier.sigma_raw" {
                copy_into(&mut self.classifier.sigma_raw, name, shape, data)?;
            } else {
                self.encoder.load_named_tensor(name, shape, data)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn copy_into(
    target: &mut ndarray::Array2<f32>,
    name: &str,
    shape: &[usize],
    data: &[f32],
) -> Result<(), ModelError> {
    if target.shape() != shape {
        return Err(ModelError::ShapeMismatch(format!(
            "{name}: expected {:?}, got {:?}",
            target.shape(),
            shape
        )));
    }
    for (t, &v) in target.iter_mut().zip(data) {
        *t = v;
    }
    Ok(())
}
