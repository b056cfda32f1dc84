use ndarray::{Array3, Axis};
use ssdg_data::ImageArray;

use crate::AugmentError;

/// Pixel-level adaptive instance normalization: re-standardizes each content
/// channel to the style image's per-channel mean and standard deviation,
/// then clips to [0, 1]. Deterministic; the statistic-matching contract
/// holds pre-clip up to the `epsilon` variance floor.
pub fn t_style(
    content: &ImageArray,
    style: &ImageArray,
    epsilon: f32,
) -> Result<ImageArray, AugmentError> {
    Ok(ImageArray::new_clipped(t_style_preclip(
        content, style, epsilon,
    )?))
}

/// The transform before clipping, exposed so the statistic-matching
/// invariant can be checked exactly.
pub(crate) fn t_style_preclip(
    content: &ImageArray,
    style: &ImageArray,
    epsilon: f32,
) -> Result<Array3<f32>, AugmentError> {
    if content.pixels().dim() != style.pixels().dim() {
        return Err(AugmentError::ShapeMismatch {
            content: content.pixels().shape().to_vec(),
            style: style.pixels().shape().to_vec(),
        });
    }
    let channels = content.channels();
    let mut out = content.pixels().clone();
    for c in 0..channels {
        let (mu_c, sd_c) = channel_stats(content.pixels(), c);
        let (mu_s, sd_s) = channel_stats(style.pixels(), c);
        let mut slice = out.index_axis_mut(Axis(2), c);
        slice.mapv_inplace(|v| sd_s * (v - mu_c) / (sd_c + epsilon) + mu_s);
    }
    Ok(out)
}

/// Per-channel population mean and standard deviation.
pub fn channel_stats(pixels: &Array3<f32>, channel: usize) -> (f32, f32) {
    let slice = pixels.index_axis(Axis(2), channel);
    let n = slice.len() as f64;
    let mean = slice.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = slice
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean as f32, var.sqrt() as f32)
}
