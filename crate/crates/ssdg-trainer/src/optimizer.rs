use ndarray::{Array1, Array2};
use ssdg_model::{Encoder, Model};

use crate::TrainerError;

/// Cosine annealing: lr = base * 0.5 * (1 + cos(pi * step / total)).
pub fn lr_schedule(step: u64, total_steps: u64, base_lr: f32) -> Result<f32, TrainerError> {
    if step > total_steps {
        return Err(TrainerError::StepOutOfRange {
            step,
            total: total_steps,
        });
    }
    let progress = step as f64 / total_steps as f64;
    Ok((base_lr as f64 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())) as f32)
}

/// Momentum buffers mirroring the model's parameter tensors.
#[derive(Debug, Clone)]
pub struct SgdState {
    block_weights: Vec<Array2<f32>>,
    block_gammas: Vec<Array1<f32>>,
    block_betas: Vec<Array1<f32>>,
    mu: Array2<f32>,
    sigma_raw: Array2<f32>,
}

impl SgdState {
    pub fn new(model: &Model) -> Self {
        Self {
            block_weights: model
                .encoder
                .blocks
                .iter()
                .map(|b| Array2::zeros(b.weight.dim()))
                .collect(),
            block_gammas: model
                .encoder
                .blocks
                .iter()
                .map(|b| Array1::zeros(b.gamma.len()))
                .collect(),
            block_betas: model
                .encoder
                .blocks
                .iter()
                .map(|b| Array1::zeros(b.beta.len()))
                .collect(),
            mu: Array2::zeros(model.classifier.mu.dim()),
            sigma_raw: Array2::zeros(model.classifier.sigma_raw.dim()),
        }
    }

    /// One SGD-with-momentum update. `lr_backbone` applies to the encoder,
    /// `lr_classifier` to (mu, sigma_raw); weight decay is plain L2 on all
    /// parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn apply(
        &mut self,
        model: &mut Model,
        encoder_grads: &ssdg_model::EncoderGrads,
        dmu: &Array2<f32>,
        dsigma_raw: &Array2<f32>,
        lr_backbone: f32,
        lr_classifier: f32,
        momentum: f32,
        weight_decay: f32,
    ) {
        fn update<D: ndarray::Dimension>(
            param: &mut ndarray::Array<f32, D>,
            grad: &ndarray::Array<f32, D>,
            velocity: &mut ndarray::Array<f32, D>,
            lr: f32,
            momentum: f32,
            weight_decay: f32,
        ) {
            ndarray::Zip::from(param)
                .and(grad)
                .and(velocity)
                .for_each(|p, &g, v| {
                    *v = momentum * *v + g + weight_decay * *p;
                    *p -= lr * *v;
                });
        }
        for (i, block) in model.encoder.blocks.iter_mut().enumerate() {
            update(
                &mut block.weight,
                &encoder_grads.blocks[i].dweight,
                &mut self.block_weights[i],
                lr_backbone,
                momentum,
                weight_decay,
            );
            update(
                &mut block.gamma,
                &encoder_grads.blocks[i].dgamma,
                &mut self.block_gammas[i],
                lr_backbone,
                momentum,
                weight_decay,
            );
            update(
                &mut block.beta,
                &encoder_grads.blocks[i].dbeta,
                &mut self.block_betas[i],
                lr_backbone,
                momentum,
                weight_decay,
            );
        }
        update(
            &mut model.classifier.mu,
            dmu,
            &mut self.mu,
            lr_classifier,
            momentum,
            weight_decay,
        );
        update(
            &mut model.classifier.sigma_raw,
            dsigma_raw,
            &mut self.sigma_raw,
            lr_classifier,
            momentum,
            weight_decay,
        );
    }
}

/// teacher <- decay * teacher + (1 - decay) * student, per parameter.
pub fn ema_update(teacher: &mut Model, student: &Model, decay: f32) -> Result<(), TrainerError> {
    fn blend_encoder(teacher: &mut Encoder, student: &Encoder, decay: f32) -> Result<(), TrainerError> {
        if teacher.blocks.len() != student.blocks.len() {
            return Err(TrainerError::ShapeMismatch("encoder depth differs".into()));
        }
        for (t, s) in teacher.blocks.iter_mut().zip(&student.blocks) {
            if t.weight.dim() != s.weight.dim() {
                return Err(TrainerError::ShapeMismatch("conv weight shape differs".into()));
            }
            ndarray::Zip::from(&mut t.weight)
                .and(&s.weight)
                .for_each(|t, &s| *t = decay * *t + (1.0 - decay) * s);
            ndarray::Zip::from(&mut t.gamma)
                .and(&s.gamma)
                .for_each(|t, &s| *t = decay * *t + (1.0 - decay) * s);
            ndarray::Zip::from(&mut t.beta)
                .and(&s.beta)
                .for_each(|t, &s| *t = decay * *t + (1.0 - decay) * s);
        }
        Ok(())
    }
    if teacher.classifier.mu.dim() != student.classifier.mu.dim() {
        return Err(TrainerError::ShapeMismatch("classifier shape differs".into()));
    }
    blend_encoder(&mut teacher.encoder, &student.encoder, decay)?;
    ndarray::Zip::from(&mut teacher.classifier.mu)
        .and(&student.classifier.mu)
        .for_each(|t, &s| *t = decay * *t + (1.0 - decay) * s);
    ndarray::Zip::from(&mut teacher.classifier.sigma_raw)
        .and(&student.classifier.sigma_raw)
        .for_each(|t, &s| *t = decay * *t + (1.0 - decay) * s);
    Ok(())
}
