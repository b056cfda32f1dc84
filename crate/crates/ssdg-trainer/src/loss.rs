use ndarray::{Array2, ArrayView1, Axis};

use crate::{Method, TrainerError};

const LOG_FLOOR: f32 = 1e-12;

/// A thresholded pseudo-label: argmax class, its confidence, and whether
/// it clears the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabel {
    pub class_index: usize,
    pub confidence: f32,
    pub passes: bool,
}

/// Derives a pseudo-label from a probability vector: argmax class (ties
/// broken toward the lowest index), max confidence, pass iff
/// confidence >= threshold. The producing forward pass is treated as a
/// constant target; no gradients flow through it.
pub fn make_pseudo_label(q: ArrayView1<f32>, threshold: f32) -> Result<PseudoLabel, TrainerError> {
    let sum: f32 = q.sum();
    if (sum - 1.0).abs() > 1e-4 {
        return Err(TrainerError::NotNormalized((sum - 1.0).abs()));
    }
    let mut class_index = 0;
    let mut confidence = f32::NEG_INFINITY;
    for (i, &p) in q.iter().enumerate() {
        if p > confidence {
            confidence = p;
            class_index = i;
        }
    }
    Ok(PseudoLabel {
        class_index,
        confidence,
        passes: confidence >= threshold,
    })
}

/// Mean cross-entropy of a probability batch against hard labels.
pub fn cross_entropy_mean(probs: &Array2<f32>, labels: &[usize]) -> Result<f32, TrainerError> {
    if probs.nrows() == 0 || labels.is_empty() {
        return Err(TrainerError::EmptyBatch);
    }
    if probs.nrows() != labels.len() {
        return Err(TrainerError::ShapeMismatch(format!(
            "{} rows vs {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    let mut total = 0.0f64;
    for (row, &label) in probs.axis_iter(Axis(0)).zip(labels) {
        total -= (row[label].max(LOG_FLOOR) as f64).ln();
    }
    Ok((total / labels.len() as f64) as f32)
}

/// Thresholded cross-entropy against pseudo-labels with an explicit
/// divisor: sum over passing examples of -log p(pseudo class), divided by
/// `divisor` (the full batch size in training; exposed so the masked-mean
/// convention is testable directly). Non-passing examples contribute
/// exactly zero.
pub fn masked_cross_entropy(
    probs: &Array2<f32>,
    pseudo: &[PseudoLabel],
    divisor: usize,
) -> Result<f32, TrainerError> {
    if divisor == 0 {
        return Err(TrainerError::EmptyBatch);
    }
    if probs.nrows() != pseudo.len() {
        return Err(TrainerError::ShapeMismatch(format!(
            "{} rows vs {} pseudo-labels",
            probs.nrows(),
            pseudo.len()
        )));
    }
    let mut total = 0.0f64;
    for (row, pl) in probs.axis_iter(Axis(0)).zip(pseudo) {
        if pl.passes {
            total -= (row[pl.class_index].max(LOG_FLOOR) as f64).ln();
        }
    }
    Ok((total / divisor as f64) as f32)
}

/// Mean Shannon entropy (nats) of a probability batch.
pub fn entropy_mean(probs: &Array2<f32>) -> Result<f32, TrainerError> {
    if probs.nrows() == 0 {
        return Err(TrainerError::EmptyBatch);
    }
    let mut total = 0.0f64;
    for row in probs.axis_iter(Axis(0)) {
        for &p in row.iter() {
            if p > 0.0 {
                total -= (p as f64) * (p as f64).ln();
            }
        }
    }
    Ok((total / probs.nrows() as f64) as f32)
}

/// Routes a gradient on probabilities back through the softmax:
/// dlogits = p * (g - <g, p>).
pub fn softmax_backward(probs: &Array2<f32>, dprobs: &Array2<f32>) -> Array2<f32> {
    let mut out = Array2::<f32>::zeros(probs.dim());
    for ((mut o, p), g) in out
        .axis_iter_mut(Axis(0))
        .zip(probs.axis_iter(Axis(0)))
        .zip(dprobs.axis_iter(Axis(0)))
    {
        let dot: f32 = p.dot(&g);
        for ((o, &pv), &gv) in o.iter_mut().zip(p.iter()).zip(g.iter()) {
            *o = pv * (gv - dot);
        }
    }
    out
}

/// Per-step loss components before combination.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepLosses {
    pub labeled: f32,
    pub strong: f32,
    pub style: f32,
    /// entropy term (entmin) or consistency term (meanteacher)
    pub aux: f32,
}

/// Combines components according to the method's recipe. StyleMatch is the
/// unweighted sum of the three view losses; no balancing weights anywhere.
pub fn total_loss(losses: &StepLosses, method: Method, entmin_weight: f32) -> f32 {
    match method {
        Method::Vanilla => losses.labeled,
        Method::Entmin => losses.labeled + entmin_weight * losses.aux,
        Method::Meanteacher => losses.labeled + losses.aux,
        Method::Fixmatch | Method::FixmatchSnn | Method::StylematchStrongOnly => {
            losses.labeled + losses.strong
        }
        Method::StylematchStyleOnly => losses.labeled + losses.style,
        Method::Stylematch => losses.labeled + losses.strong + losses.style,
    }
}
