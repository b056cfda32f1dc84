use ndarray::{Array1, Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use ssdg_data::ImageArray;

use crate::{ModelError, NamedTensors};

const IN_EPS: f32 = 1e-5;

/// Architecture descriptor: stride-2 3x3 conv blocks (conv, instance norm,
/// ReLU), global average pool to `output_dim`, and the per-channel input
/// normalization statistics applied before the first block.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSpec {
    pub widths: Vec<usize>,
    pub output_dim: usize,
    pub input_mean: Vec<f32>,
    pub input_std: Vec<f32>,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            widths: vec![32, 64, 128, 128],
            output_dim: 128,
            input_mean: vec![0.5, 0.5, 0.5],
            input_std: vec![0.25, 0.25, 0.25],
        }
    }
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.widths.is_empty() {
            return Err(ModelError::InvalidParameter("widths must be nonempty".into()));
        }
        if *self.widths.last().unwrap() != self.output_dim {
            return Err(ModelError::InvalidParameter(format!(
                "last width {} must equal output_dim {}",
                self.widths.last().unwrap(),
                self.output_dim
            )));
        }
        if self.input_mean.len() != self.input_std.len() {
            return Err(ModelError::InvalidParameter(
                "input_mean/input_std length mismatch".into(),
            ));
        }
        if self.input_std.iter().any(|&s| s <= 0.0) {
            return Err(ModelError::InvalidParameter("input_std must be positive".into()));
        }
        Ok(())
    }
}

/// One conv block's parameters. The conv weight is stored GEMM-ready as
/// (C_out, C_in * 9) with columns ordered (ky, kx, c_in).
#[derive(Debug, Clone)]
pub struct ConvBlockParams {
    pub weight: Array2<f32>,
    pub gamma: Array1<f32>,
    pub beta: Array1<f32>,
    pub in_channels: usize,
    pub out_channels: usize,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub spec: EncoderSpec,
    pub blocks: Vec<ConvBlockParams>,
}

impl Encoder {
    /// He-initialized encoder, deterministic per seed.
    pub fn new(spec: EncoderSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::with_capacity(spec.widths.len());
        let mut in_channels = spec.input_mean.len();
        for &out_channels in &spec.widths {
            let fan_in = in_channels * 9;
            let normal = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).unwrap();
            blocks.push(ConvBlockParams {
                weight: Array2::from_shape_fn((out_channels, fan_in), |_| normal.sample(&mut rng)),
                gamma: Array1::ones(out_channels),
                beta: Array1::zeros(out_channels),
                in_channels,
                out_channels,
            });
            in_channels = out_channels;
        }
        Ok(Self { spec, blocks })
    }

    pub fn to_named_tensors(&self) -> NamedTensors {
        let mut tensors = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            tensors.push((
                format!("encoder.block{i}.weight"),
                block.weight.shape().to_vec(),
                block.weight.iter().copied().collect(),
            ));
            tensors.push((
                format!("encoder.block{i}.gamma"),
                block.gamma.shape().to_vec(),
                block.gamma.to_vec(),
            ));
            tensors.push((
                format!("encoder.block{i}.beta"),
                block.beta.shape().to_vec(),
                block.beta.to_vec(),
            ));
        }
        tensors
    }

    pub fn load_named_tensor(
        &mut self,
        name: &str,
        shape: &[usize],
        data: &[f32],
    ) -> Result<(), ModelError> {
        let rest = name
            .strip_prefix("encoder.block")
            .ok_or_else(|| ModelError::Checkpoint(format!("unknown tensor '{name}'")))?;
        let (index, field) = rest
            .split_once('.')
            .ok_or_else(|| ModelError::Checkpoint(format!("malformed tensor name '{name}'")))?;
        let index: usize = index
            .parse()
            .map_err(|_| ModelError::Checkpoint(format!("malformed tensor name '{name}'")))?;
        let block = self
            .blocks
            .get_mut(index)
            .ok_or_else(|| ModelError::Checkpoint(format!("no block {index}")))?;
        match field {
            "weight" => crate::copy_into(&mut block.weight, name, shape, data),
            "gamma" => copy_into_1d(&mut block.gamma, name, shape, data),
            "beta" => copy_into_1d(&mut block.beta, name, shape, data),
            _ => Err(ModelError::Checkpoint(format!("unknown tensor '{name}'"))),
        }
    }

    /// Forward pass over a normalized input batch (N, H*W, C_in).
    /// Deterministic in both training and evaluation (instance norm carries
    /// no batch state).
    pub fn forward(
        &self,
        input: &Array3<f32>,
        height: usize,
        width: usize,
        want_cache: bool,
    ) -> Result<(Array2<f32>, Option<EncoderCache>), ModelError> {
        let (n, hw, c_in) = input.dim();
        if hw != height * width || c_in != self.blocks[0].in_channels {
            return Err(ModelError::ShapeMismatch(format!(
                "input (N={n}, HW={hw}, C={c_in}) vs expected HW={} C={}",
                height * width,
                self.blocks[0].in_channels
            )));
        }
        let (mut fh, mut fw) = (height, width);
        for _ in &self.blocks {
            fh = conv_out(fh);
            fw = conv_out(fw);
        }
        if fh * fw < 2 {
            return Err(ModelError::InvalidParameter(format!(
                "input {height}x{width} collapses to a single spatial position \
                 after {} stride-2 blocks; instance norm needs at least 2",
                self.blocks.len()
            )));
        }
        let mut x = input.clone();
        let mut h = height;
        let mut w = width;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, cache) = block.forward(&x, h, w, want_cache);
            if let Some(cache) = cache {
                caches.push(cache);
            }
            h = conv_out(h);
            w = conv_out(w);
            x = y;
        }
        // global average pool over the remaining spatial positions
        let features = x.mean_axis(Axis(1)).expect("nonempty spatial axis");
        let cache = want_cache.then(|| EncoderCache {
            caches,
            final_hw: h * w,
            input_height: height,
            input_width: width,
        });
        Ok((features, cache))
    }

    /// Backward pass. `dfeatures` is dL/d(pooled features), (N, D).
    /// Accumulates into `grads`; input-image gradients are not produced.
    pub fn backward(&self, cache: &EncoderCache, dfeatures: &Array2<f32>, grads: &mut EncoderGrads) {
        let (n, d) = dfeatures.dim();
        // undo the global average pool
        let scale = 1.0 / cache.final_hw as f32;
        let mut dy = Array3::from_shape_fn((n, cache.final_hw, d), |(i, _, c)| {
            dfeatures[[i, c]] * scale
        });
        for (i, block) in self.blocks.iter().enumerate().rev() {
            let want_dx = i > 0;
            let dx = block.backward(&cache.caches[i], &dy, &mut grads.blocks[i], want_dx);
            if let Some(dx) = dx {
                dy = dx;
            }
        }
    }

    pub fn zero_grads(&self) -> EncoderGrads {
        EncoderGrads {
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockGrads {
                    dweight: Array2::zeros(b.weight.dim()),
                    dgamma: Array1::zeros(b.gamma.len()),
                    dbeta: Array1::zeros(b.beta.len()),
                })
                .collect(),
        }
    }
}

fn copy_into_1d(
    target: &mut Array1<f32>,
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

/// Output side length of a stride-2, pad-1, 3x3 convolution.
fn conv_out(side: usize) -> usize {
    (side - 1) / 2 + 1
}

pub struct EncoderCache {
    caches: Vec<BlockCache>,
    final_hw: usize,
    #[allow(dead_code)]
    input_height: usize,
    #[allow(dead_code)]
    input_width: usize,
}

pub struct EncoderGrads {
    pub blocks: Vec<BlockGrads>,
}

pub struct BlockGrads {
    pub dweight: Array2<f32>,
    pub dgamma: Array1<f32>,
    pub dbeta: Array1<f32>,
}

struct BlockCache {
    /// im2col matrix of the block input, (N*OH*OW, C_in*9)
    cols: Array2<f32>,
    /// normalized pre-affine activations, (N, OH*OW, C_out)
    x_hat: Array3<f32>,
    /// 1 / sqrt(var + eps), (N, C_out)
    inv_std: Array2<f32>,
    /// post-ReLU output, (N, OH*OW, C_out)
    output: Array3<f32>,
    in_height: usize,
    in_width: usize,
}

impl ConvBlockParams {
    fn forward(
        &self,
        x: &Array3<f32>,
        h: usize,
        w: usize,
        want_cache: bool,
    ) -> (Array3<f32>, Option<BlockCache>) {
        let (n, _, _) = x.dim();
        let oh = conv_out(h);
        let ow = conv_out(w);
        let cols = im2col(x, h, w, self.in_channels);
        // (N*OH*OW, C_out)
        let y_flat = cols.dot(&self.weight.t());
        let mut y = y_flat
            .into_shape_with_order((n, oh * ow, self.out_channels))
            .expect("conv reshape");

        // instance norm per (image, channel) over spatial positions
        let m = (oh * ow) as f32;
        let mut inv_std = Array2::<f32>::zeros((n, self.out_channels));
        let mut x_hat = want_cache.then(|| Array3::<f32>::zeros(y.dim()));
        for i in 0..n {
            for c in 0..self.out_channels {
                let mut mean = 0.0f32;
                for p in 0..oh * ow {
                    mean += y[[i, p, c]];
                }
                mean /= m;
                let mut var = 0.0f32;
                for p in 0..oh * ow {
                    let d = y[[i, p, c]] - mean;
                    var += d * d;
                }
                var /= m;
                let istd = 1.0 / (var + IN_EPS).sqrt();
                inv_std[[i, c]] = istd;
                let g = self.gamma[c];
                let b = self.beta[c];
                for p in 0..oh * ow {
                    let xh = (y[[i, p, c]] - mean) * istd;
                    if let Some(cache) = x_hat.as_mut() {
                        cache[[i, p, c]] = xh;
                    }
                    // affine then ReLU
                    y[[i, p, c]] = (g * xh + b).max(0.0);
                }
            }
        }
        let cache = want_cache.then(|| BlockCache {
            cols,
            x_hat: x_hat.unwrap(),
            inv_std,
            output: y.clone(),
            in_height: h,
            in_width: w,
        });
        (y, cache)
    }

    fn backward(
        &self,
        cache: &BlockCache,
        dy: &Array3<f32>,
        grads: &mut BlockGrads,
        want_dx: bool,
    ) -> Option<Array3<f32>> {
        let (n, hw, c_out) = dy.dim();
        let m = hw as f32;
        // ReLU and instance-norm backward, written into d(conv output)
        let mut dconv = Array3::<f32>::zeros((n, hw, c_out));
        for i in 0..n {
            for c in 0..c_out {
                let g = self.gamma[c];
                let istd = cache.inv_std[[i, c]];
                // first pass: relu mask + affine grads + the two means
                let mut sum_dxhat = 0.0f32;
                let mut sum_dxhat_xhat = 0.0f32;
                let mut dgamma = 0.0f32;
                let mut dbeta = 0.0f32;
                for p in 0..hw {
                    let active = cache.output[[i, p, c]] > 0.0;
                    let d = if active { dy[[i, p, c]] } else { 0.0 };
                    let xh = cache.x_hat[[i, p, c]];
                    dgamma += d * xh;
                    dbeta += d;
                    let dxh = d * g;
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xh;
                }
                grads.dgamma[c] += dgamma;
                grads.dbeta[c] += dbeta;
                let mean_dxhat = sum_dxhat / m;
                let mean_dxhat_xhat = sum_dxhat_xhat / m;
                for p in 0..hw {
                    let active = cache.output[[i, p, c]] > 0.0;
                    let d = if active { dy[[i, p, c]] } else { 0.0 };
                    let xh = cache.x_hat[[i, p, c]];
                    dconv[[i, p, c]] = istd * (d * g - mean_dxhat - xh * mean_dxhat_xhat);
                }
            }
        }
        // conv backward via the cached im2col matrix
        let dconv_flat = dconv
            .into_shape_with_order((n * hw, c_out))
            .expect("grad reshape");
        grads.dweight += &dconv_flat.t().dot(&cache.cols);
        if want_dx {
            let dcols = dconv_flat.dot(&self.weight);
            Some(col2im(
                &dcols,
                n,
                cache.in_height,
                cache.in_width,
                self.in_channels,
            ))
        } else {
            None
        }
    }
}

/// Gathers 3x3 stride-2 pad-1 patches: rows are (image, output position),
/// columns are (ky, kx, c_in). Out-of-bounds taps are zero.
fn im2col(x: &Array3<f32>, h: usize, w: usize, c_in: usize) -> Array2<f32> {
    let (n, _, _) = x.dim();
    let oh = conv_out(h);
    let ow = conv_out(w);
    let mut cols = Array2::<f32>::zeros((n * oh * ow, c_in * 9));
    for i in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (i * oh + oy) * ow + ox;
                for ky in 0..3usize {
                    let iy = (2 * oy + ky) as i64 - 1;
                    if iy < 0 || iy >= h as i64 {
                        continue;
                    }
                    for kx in 0..3usize {
                        let ix = (2 * ox + kx) as i64 - 1;
                        if ix < 0 || ix >= w as i64 {
                            continue;
                        }
                        let p = iy as usize * w + ix as usize;
                        let col_base = (ky * 3 + kx) * c_in;
                        for c in 0..c_in {
                            cols[[row, col_base + c]] = x[[i, p, c]];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds column gradients back onto the input layout.
fn col2im(dcols: &Array2<f32>, n: usize, h: usize, w: usize, c_in: usize) -> Array3<f32> {
    let oh = conv_out(h);
    let ow = conv_out(w);
    let mut dx = Array3::<f32>::zeros((n, h * w, c_in));
    for i in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (i * oh + oy) * ow + ox;
                for ky in 0..3usize {
                    let iy = (2 * oy + ky) as i64 - 1;
                    if iy < 0 || iy >= h as i64 {
                        continue;
                    }
                    for kx in 0..3usize {
                        let ix = (2 * ox + kx) as i64 - 1;
                        if ix < 0 || ix >= w as i64 {
                            continue;
                        }
                        let p = iy as usize * w + ix as usize;
                        let col_base = (ky * 3 + kx) * c_in;
                        for c in 0..c_in {
                            dx[[i, p, c]] += dcols[[row, col_base + c]];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Stacks images into the encoder input layout (N, H*W, C), applying the
/// spec's per-channel normalization.
pub fn images_to_input<'a, I>(images: I, spec: &EncoderSpec) -> Result<Array3<f32>, ModelError>
where
    I: IntoIterator<Item = &'a ImageArray>,
{
    let images: Vec<&ImageArray> = images.into_iter().collect();
    if images.is_empty() {
        return Err(ModelError::ShapeMismatch("empty image batch".into()));
    }
    let (h, w, c) = (
        images[0].height(),
        images[0].width(),
        images[0].channels(),
    );
    if c != spec.input_mean.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} channels vs {} normalization statistics",
            c,
            spec.input_mean.len()
        )));
    }
    let mut input = Array3::<f32>::zeros((images.len(), h * w, c));
    for (i, image) in images.iter().enumerate() {
        if image.height() != h || image.width() != w || image.channels() != c {
            return Err(ModelError::ShapeMismatch("mixed image shapes in batch".into()));
        }
        let px = image.pixels();
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    input[[i, y * w + x, ch]] =
                        (px[[y, x, ch]] - spec.input_mean[ch]) / spec.input_std[ch];
                }
            }
        }
    }
    Ok(input)
}

/// Encodes a batch of images to feature vectors (evaluation path, no cache).
pub fn encode(images: &[ImageArray], encoder: &Encoder) -> Result<Array2<f32>, ModelError> {
    let input = images_to_input(images, &encoder.spec)?;
    let h = images[0].height();
    let w = images[0].width();
    let (features, _) = encoder.forward(&input, h, w, false)?;
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3 as A3;
    use rand::Rng;

    fn tiny_encoder(seed: u64) -> Encoder {
        Encoder::new(
            EncoderSpec {
                widths: vec![4, 5],
                output_dim: 5,
                input_mean: vec![0.5, 0.5, 0.5],
                input_std: vec![0.25, 0.25, 0.25],
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn forward_shapes() {
        let enc = tiny_encoder(0);
        let x = A3::zeros((3, 64, 3));
        let (features, _) = enc.forward(&x, 8, 8, false).unwrap();
        assert_eq!(features.dim(), (3, 5));
    }

    #[test]
    fn forward_is_deterministic_and_batch_equivariant() {
        let enc = tiny_encoder(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = A3::from_shape_fn((4, 64, 3), |_| rng.gen_range(-1.0..1.0f32));
        let (f1, _) = enc.forward(&x, 8, 8, false).unwrap();
        let (f2, _) = enc.forward(&x, 8, 8, false).unwrap();
        assert_eq!(f1, f2);
        // permute the batch: outputs permute identically
        let perm = [2usize, 0, 3, 1];
        let xp = A3::from_shape_fn((4, 64, 3), |(i, p, c)| x[[perm[i], p, c]]);
        let (fp, _) = enc.forward(&xp, 8, 8, false).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            for d in 0..5 {
                assert!((fp[[i, d]] - f1[[src, d]]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn encoder_gradients_match_finite_differences() {
        let mut enc = tiny_encoder(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = A3::from_shape_fn((2, 64, 3), |_| rng.gen_range(-1.0..1.0f32));
        // arbitrary smooth scalar of the features
        let proj = Array2::from_shape_fn((2, 5), |_| rng.gen_range(-1.0..1.0f32));
        let loss = |enc: &Encoder| -> f64 {
            let (f, _) = enc.forward(&x, 8, 8, false).unwrap();
            f.iter().zip(proj.iter()).map(|(&a, &b)| (a * b) as f64).sum()
        };

        let (f, cache) = enc.forward(&x, 8, 8, true).unwrap();
        assert_eq!(f.dim(), proj.dim());
        let mut grads = enc.zero_grads();
        enc.backward(cache.as_ref().unwrap(), &proj, &mut grads);

        let step = 1e-3f32;
        // spot-check a handful of parameters in every tensor of every block
        for b in 0..enc.blocks.len() {
            let picks: Vec<(usize, usize)> = (0..6)
                .map(|_| {
                    (
                        rng.gen_range(0..enc.blocks[b].weight.nrows()),
                        rng.gen_range(0..enc.blocks[b].weight.ncols()),
                    )
                })
                .collect();
            for (r, c) in picks {
                let orig = enc.blocks[b].weight[[r, c]];
                enc.blocks[b].weight[[r, c]] = orig + step;
                let up = loss(&enc);
                enc.blocks[b].weight[[r, c]] = orig - step;
                let down = loss(&enc);
                enc.blocks[b].weight[[r, c]] = orig;
                let numeric = (up - down) / (2.0 * step as f64);
                let analytic = grads.blocks[b].dweight[[r, c]] as f64;
                let denom = numeric.abs().max(analytic.abs()).max(1e-4);
                assert!(
                    ((numeric - analytic) / denom).abs() < 2e-2,
                    "block {b} w[{r},{c}]: numeric {numeric} vs analytic {analytic}"
                );
            }
            for c in 0..enc.blocks[b].gamma.len().min(3) {
                let orig = enc.blocks[b].gamma[c];
                enc.blocks[b].gamma[c] = orig + step;
                let up = loss(&enc);
                enc.blocks[b].gamma[c] = orig - step;
                let down = loss(&enc);
                enc.blocks[b].gamma[c] = orig;
                let numeric = (up - down) / (2.0 * step as f64);
                let analytic = grads.blocks[b].dgamma[c] as f64;
                let denom = numeric.abs().max(analytic.abs()).max(1e-4);
                assert!(
                    ((numeric - analytic) / denom).abs() < 2e-2,
                    "block {b} gamma[{c}]: numeric {numeric} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn images_to_input_normalizes() {
        let img = ImageArray::new_clipped(A3::from_elem((4, 4, 3), 0.75));
        let spec = EncoderSpec::default();
        let input = images_to_input([&img], &spec).unwrap();
        assert!(input.iter().all(|&v| (v - 1.0).abs() < 1e-6));
    }
}
