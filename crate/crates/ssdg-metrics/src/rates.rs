use ssdg_trainer::PseudoLabelDiag;

use crate::MetricsError;

/// Fraction of pseudo-labels matching the (diagnostic) ground truth.
/// Computed over the whole batch by default; with `restrict_to_passing`
/// only threshold-passers count, and an empty passing set is reported as
/// absent rather than as a number.
pub fn pseudo_label_accuracy(
    diags: &[PseudoLabelDiag],
    restrict_to_passing: bool,
) -> Result<Option<f32>, MetricsError> {
    if diags.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let considered: Vec<&PseudoLabelDiag> = if restrict_to_passing {
        diags.iter().filter(|d| d.pseudo.passes).collect()
    } else {
        diags.iter().collect()
    };
    if considered.is_empty() {
        return Ok(None);
    }
    let correct = considered.iter().filter(|d| d.correct).count();
    Ok(Some(correct as f32 / considered.len() as f32))
}

/// Fraction of the batch whose confidence clears `threshold`.
pub fn overconfidence_rate(
    diags: &[PseudoLabelDiag],
    threshold: f32,
) -> Result<f32, MetricsError> {
    if diags.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let passing = diags
        .iter()
        .filter(|d| d.pseudo.confidence >= threshold)
        .count();
    Ok(passing as f32 / diags.len() as f32)
}
