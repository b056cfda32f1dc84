use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use ssdg_augment::{pick_style_source, t_strong, t_style, t_weak, AugmentationPolicy};
use ssdg_data::{batch_stream, derive_seed, BatchBundle, ImageArray, SsdgSplit};
use ssdg_model::{
    cosine_scores, cosine_scores_backward, init_classifier, mean_prototypes, prototype_backward,
    sample_prototypes, Encoder, EncoderCache, EncoderGrads, EncoderSpec, Model,
};

use crate::loss::{
    cross_entropy_mean, entropy_mean, make_pseudo_label, masked_cross_entropy, softmax_backward,
    total_loss, PseudoLabel, StepLosses,
};
use crate::optimizer::{ema_update, lr_schedule, SgdState};
use crate::{Method, TrainConfig, TrainerError};

const TAG_ENCODER: u64 = 0x454e43;
const TAG_CLASSIFIER: u64 = 0x434c53;
const TAG_STREAM: u64 = 0x5354524d;
const TAG_STEP: u64 = 0x53544550;

const LOG_FLOOR: f32 = 1e-12;

/// Everything mutated across training steps.
pub struct TrainState {
    pub model: Model,
    /// EMA copy of the model, present only for the mean-teacher method.
    pub teacher: Option<Model>,
    pub opt: SgdState,
    pub step: u64,
}

impl TrainState {
    /// Initializes model, optimizer and (if needed) teacher. The encoder's
    /// input normalization is replaced by statistics computed over the
    /// split's source images; encoder and classifier seeds are derived
    /// independently from `config.seed`.
    pub fn new(
        split: &SsdgSplit,
        num_classes: usize,
        base_spec: &EncoderSpec,
        config: &TrainConfig,
    ) -> Result<Self, TrainerError> {
        config.validate()?;
        let (mean, std) = compute_input_stats(split)?;
        let spec = EncoderSpec {
            input_mean: mean,
            input_std: std,
            ..base_spec.clone()
        };
        let encoder = Encoder::new(spec, derive_seed(config.seed, &[TAG_ENCODER]))?;
        let mut classifier = init_classifier(
            num_classes,
            encoder.spec.output_dim,
            derive_seed(config.seed, &[TAG_CLASSIFIER]),
        );
        classifier.temperature = config.temperature;
        let model = Model::new(encoder, classifier)?;
        let teacher = (config.method == Method::Meanteacher).then(|| model.clone());
        let opt = SgdState::new(&model);
        Ok(Self {
            model,
            teacher,
            opt,
            step: 0,
        })
    }
}

/// One pseudo-label next to whether it matched the (diagnostic) ground
/// truth. Ordered labeled stream first, then unlabeled stream.
#[derive(Debug, Clone, Copy)]
pub struct PseudoLabelDiag {
    pub pseudo: PseudoLabel,
    pub correct: bool,
    /// true for the labeled stream (truth was the real label), false for
    /// the unlabeled stream (truth came from the diagnostics channel)
    pub from_labeled: bool,
}

/// Everything a step reports to the caller.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// index of the step that just ran (0-based)
    pub step: u64,
    pub losses: StepLosses,
    pub total: f32,
    pub lr_backbone: f32,
    pub lr_classifier: f32,
    /// empty for methods without pseudo-labels
    pub pseudo_labels: Vec<PseudoLabelDiag>,
    pub mean_sigma: f32,
}

/// Seed of the batch stream belonging to a training run with `seed`.
/// Exposed so external drivers of the step loop sample the same batches
/// as [`run_training`].
pub fn training_stream_seed(seed: u64) -> u64 {
    derive_seed(seed, &[TAG_STREAM])
}

/// Per-channel mean and standard deviation over every source image
/// (labeled and unlabeled pools alike).
pub fn compute_input_stats(split: &SsdgSplit) -> Result<(Vec<f32>, Vec<f32>), TrainerError> {
    let mut first: Option<usize> = None;
    let mut sums: Vec<f64> = Vec::new();
    let mut sq_sums: Vec<f64> = Vec::new();
    let mut count = 0.0f64;
    let mut add = |image: &ImageArray| {
        let c = image.channels();
        if first.is_none() {
            first = Some(c);
            sums = vec![0.0; c];
            sq_sums = vec![0.0; c];
        }
        for ch in 0..c {
            let slice = image.pixels().index_axis(Axis(2), ch);
            for &v in slice.iter() {
                sums[ch] += v as f64;
                sq_sums[ch] += (v as f64) * (v as f64);
            }
        }
        count += slice_len(image) as f64;
    };
    for source in &split.sources {
        for ex in &source.labeled {
            add(&ex.image);
        }
        for ex in &source.unlabeled {
            add(&ex.image);
        }
    }
    if count == 0.0 {
        return Err(TrainerError::EmptyBatch);
    }
    let mean: Vec<f32> = sums.iter().map(|&s| (s / count) as f32).collect();
    let std: Vec<f32> = sq_sums
        .iter()
        .zip(&mean)
        .map(|(&sq, &m)| {
            let var = (sq / count - (m as f64) * (m as f64)).max(0.0);
            (var.sqrt() as f32).max(1e-3)
        })
        .collect();
    Ok((mean, std))
}

fn slice_len(image: &ImageArray) -> usize {
    image.height() * image.width()
}

/// Prototype matrix used for one forward/backward branch, with the noise
/// that produced it (absent when the branch uses the mean prototypes).
#[derive(Clone)]
struct ProtoDraw {
    w: Array2<f32>,
    noise: Option<Array2<f32>>,
}

struct ProtoSource<'a> {
    snn: bool,
    resample: bool,
    shared: Option<ProtoDraw>,
    rng: &'a mut ChaCha8Rng,
}

impl ProtoSource<'_> {
    fn draw(&mut self, model: &Model) -> ProtoDraw {
        if !self.snn {
            return ProtoDraw {
                w: mean_prototypes(&model.classifier),
                noise: None,
            };
        }
        if !self.resample {
            if let Some(shared) = &self.shared {
                return shared.clone();
            }
        }
        let normal = Normal::new(0.0f32, 1.0).unwrap();
        let noise = Array2::from_shape_fn(model.classifier.mu.dim(), |_| {
            normal.sample(self.rng)
        });
        let w = sample_prototypes(&model.classifier, &noise).expect("noise shape matches mu");
        let draw = ProtoDraw {
            w,
            noise: Some(noise),
        };
        if !self.resample {
            self.shared = Some(draw.clone());
        }
        draw
    }
}

fn forward_images(
    encoder: &Encoder,
    images: &[ImageArray],
    want_cache: bool,
) -> Result<(Array2<f32>, Option<EncoderCache>), TrainerError> {
    let input = ssdg_model::images_to_input(images, &encoder.spec)?;
    let h = images[0].height();
    let w = images[0].width();
    Ok(encoder.forward(&input, h, w, want_cache)?)
}

/// dL/dlogits of mean cross-entropy with hard labels: (p - onehot) / N.
fn ce_dlogits(probs: &Array2<f32>, labels: &[usize]) -> Array2<f32> {
    let n = labels.len() as f32;
    let mut d = probs / n;
    for (i, &y) in labels.iter().enumerate() {
        d[[i, y]] -= 1.0 / n;
    }
    d
}

/// dL/dlogits of the thresholded pseudo-label cross-entropy. Rows whose
/// pseudo-label misses the threshold are exactly zero: the indicator cuts
/// the gradient, it does not rescale it.
fn masked_ce_dlogits(probs: &Array2<f32>, pseudo: &[PseudoLabel], divisor: usize) -> Array2<f32> {
    let mut d = Array2::<f32>::zeros(probs.dim());
    let n = divisor as f32;
    for (i, pl) in pseudo.iter().enumerate() {
        if pl.passes {
            for c in 0..probs.ncols() {
                d[[i, c]] = probs[[i, c]] / n;
            }
            d[[i, pl.class_index]] -= 1.0 / n;
        }
    }
    d
}

struct GradAccum {
    enc: EncoderGrads,
    dmu: Array2<f32>,
    dsigma: Array2<f32>,
}

impl GradAccum {
    fn route_dw(&mut self, model: &Model, draw: &ProtoDraw, dw: &Array2<f32>) {
        match &draw.noise {
            Some(noise) => {
                let (dmu, dsigma) = prototype_backward(&model.classifier, noise, dw);
                self.dmu += &dmu;
                self.dsigma += &dsigma;
            }
            None => self.dmu += dw,
        }
    }
}

/// Runs one optimization step on `bundle` and advances `state`.
///
/// View construction, forward passes and the per-method loss recipe all
/// draw from a generator derived from (config.seed, step), so a step is a
/// pure function of (state, bundle, config, policy).
pub fn train_step(
    state: &mut TrainState,
    bundle: &BatchBundle,
    split: &SsdgSplit,
    config: &TrainConfig,
    policy: &AugmentationPolicy,
) -> Result<StepOutput, TrainerError> {
    let method = config.method;
    let labeled: Vec<_> = bundle.all_labeled().collect();
    let unlabeled: Vec<_> = bundle.all_unlabeled().collect();
    if labeled.is_empty() {
        return Err(TrainerError::EmptyBatch);
    }
    let n_l = labeled.len();
    let n_u = unlabeled.len();
    let labels: Vec<usize> = labeled.iter().map(|ex| ex.label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[TAG_STEP, state.step]));

    // -- view construction (fixed draw order) --------------------------
    let weak_l: Vec<ImageArray> = labeled
        .iter()
        .map(|ex| t_weak(&ex.image, &policy.weak, &mut rng))
        .collect();
    let weak_u: Vec<ImageArray> = if method.uses_unlabeled() {
        unlabeled
            .iter()
            .map(|ex| t_weak(&ex.image, &policy.weak, &mut rng))
            .collect()
    } else {
        Vec::new()
    };
    // the teacher sees an independent weak view of the same examples
    let weak_u_teacher: Vec<ImageArray> = if method == Method::Meanteacher {
        unlabeled
            .iter()
            .map(|ex| t_weak(&ex.image, &policy.weak, &mut rng))
            .collect()
    } else {
        Vec::new()
    };
    let strong_views: Vec<ImageArray> = if method.uses_strong_view() {
        labeled
            .iter()
            .map(|ex| &ex.image)
            .chain(unlabeled.iter().map(|ex| &ex.image))
            .map(|img| t_strong(img, &policy.strong, &mut rng))
            .collect()
    } else {
        Vec::new()
    };
    let style_views: Vec<ImageArray> = if method.uses_style_view() {
        // queries in bundle order: labeled stream, then unlabeled stream
        let mut queries: Vec<(usize, usize, &ImageArray)> = Vec::with_capacity(n_l + n_u);
        for (s, (exs, idxs)) in bundle
            .labeled
            .iter()
            .zip(&bundle.labeled_indices)
            .enumerate()
        {
            for (ex, &i) in exs.iter().zip(idxs) {
                queries.push((s, i, &ex.image));
            }
        }
        for (s, (exs, idxs)) in bundle
            .unlabeled
            .iter()
            .zip(&bundle.unlabeled_indices)
            .enumerate()
        {
            let offset = split.sources[s].labeled.len();
            for (ex, &i) in exs.iter().zip(idxs) {
                queries.push((s, offset + i, &ex.image));
            }
        }
        let mut views = Vec::with_capacity(queries.len());
        for (pos, index, image) in queries {
            let pick = pick_style_source(pos, index, split, policy.style.mode, &mut rng)?;
            views.push(t_style(image, &pick.image, policy.style.epsilon)?);
        }
        views
    } else {
        Vec::new()
    };

    let mut protos = ProtoSource {
        snn: method.uses_snn(),
        resample: config.resample_noise_per_view,
        shared: None,
        rng: &mut rng,
    };
    let model = &state.model;
    let mut grads = GradAccum {
        enc: model.encoder.zero_grads(),
        dmu: Array2::zeros(model.classifier.mu.dim()),
        dsigma: Array2::zeros(model.classifier.sigma_raw.dim()),
    };
    let mut losses = StepLosses::default();
    let needs_pseudo = method.uses_strong_view() || method.uses_style_view();
    let tau = model.classifier.temperature;

    // -- labeled weak views: supervised cross-entropy -------------------
    let mut pseudo = Vec::with_capacity(n_l + n_u);
    {
        let (z, cache) = forward_images(&model.encoder, &weak_l, true)?;
        let draw = protos.draw(model);
        let scores = cosine_scores(&z, &draw.w, tau)?;
        losses.labeled = cross_entropy_mean(&scores.probs, &labels)?;
        let (dz, dw) = cosine_scores_backward(&scores, &ce_dlogits(&scores.probs, &labels));
        model.encoder.backward(cache.as_ref().unwrap(), &dz, &mut grads.enc);
        grads.route_dw(model, &draw, &dw);
        if needs_pseudo {
            // the pseudo-label is a detached copy of this same forward
            for row in scores.probs.axis_iter(Axis(0)) {
                pseudo.push(make_pseudo_label(row, config.confidence_threshold)?);
            }
        }
    }

    // -- unlabeled weak views -------------------------------------------
    match method {
        Method::Vanilla => {}
        Method::Entmin => {
            let (z, cache) = forward_images(&model.encoder, &weak_u, true)?;
            let draw = protos.draw(model);
            let scores = cosine_scores(&z, &draw.w, tau)?;
            losses.aux = entropy_mean(&scores.probs)?;
            // d(mean entropy)/dp_k = -(ln p_k + 1) / N, scaled by the weight
            let n = n_u as f32;
            let dprobs = scores
                .probs
                .mapv(|p| -config.entmin_weight * (p.max(LOG_FLOOR).ln() + 1.0) / n);
            let dlogits = softmax_backward(&scores.probs, &dprobs);
            let (dz, dw) = cosine_scores_backward(&scores, &dlogits);
            model.encoder.backward(cache.as_ref().unwrap(), &dz, &mut grads.enc);
            grads.route_dw(model, &draw, &dw);
        }
        Method::Meanteacher => {
            let teacher = state.teacher.as_ref().expect("mean teacher state");
            let (zt, _) = forward_images(&teacher.encoder, &weak_u_teacher, false)?;
            let wt = mean_prototypes(&teacher.classifier);
            let target = cosine_scores(&zt, &wt, teacher.classifier.temperature)?.probs;

            let (z, cache) = forward_images(&model.encoder, &weak_u, true)?;
            let draw = protos.draw(model);
            let scores = cosine_scores(&z, &draw.w, tau)?;
            let diff = &scores.probs - &target;
            let denom = (diff.len()) as f32;
            losses.aux = diff.iter().map(|&d| d * d).sum::<f32>() / denom;
            let dprobs = diff.mapv(|d| 2.0 * d / denom);
            let dlogits = softmax_backward(&scores.probs, &dprobs);
            let (dz, dw) = cosine_scores_backward(&scores, &dlogits);
            model.encoder.backward(cache.as_ref().unwrap(), &dz, &mut grads.enc);
            grads.route_dw(model, &draw, &dw);
        }
        _ => {
            // pseudo-labels only: forward without gradients
            let (z, _) = forward_images(&model.encoder, &weak_u, false)?;
            let draw = protos.draw(model);
            let scores = cosine_scores(&z, &draw.w, tau)?;
            for row in scores.probs.axis_iter(Axis(0)) {
                pseudo.push(make_pseudo_label(row, config.confidence_threshold)?);
            }
        }
    }

    // -- strong and style views over both streams ------------------------
    let divisor = n_l + n_u;
    let consistency_branch = |images: &[ImageArray],
                                  protos: &mut ProtoSource,
                                  grads: &mut GradAccum|
     -> Result<f32, TrainerError> {
        let (z, cache) = forward_images(&model.encoder, images, true)?;
        let draw = protos.draw(model);
        let scores = cosine_scores(&z, &draw.w, tau)?;
        let loss = masked_cross_entropy(&scores.probs, &pseudo, divisor)?;
        let dlogits = masked_ce_dlogits(&scores.probs, &pseudo, divisor);
        let (dz, dw) = cosine_scores_backward(&scores, &dlogits);
        model.encoder.backward(cache.as_ref().unwrap(), &dz, &mut grads.enc);
        grads.route_dw(model, &draw, &dw);
        Ok(loss)
    };
    if method.uses_strong_view() {
        losses.strong = consistency_branch(&strong_views, &mut protos, &mut grads)?;
    }
    if method.uses_style_view() {
        losses.style = consistency_branch(&style_views, &mut protos, &mut grads)?;
    }

    let total = total_loss(&losses, method, config.entmin_weight);
    if !(losses.labeled.is_finite()
        && losses.strong.is_finite()
        && losses.style.is_finite()
        && losses.aux.is_finite())
    {
        return Err(TrainerError::NonFiniteLoss {
            step: state.step,
            labeled: losses.labeled,
            strong: losses.strong,
            style: losses.style,
            aux: losses.aux,
        });
    }

    // -- update -----------------------------------------------------------
    let lr_backbone = lr_schedule(state.step, config.steps, config.lr_backbone)?;
    let lr_classifier = lr_schedule(state.step, config.steps, config.lr_classifier)?;
    state.opt.apply(
        &mut state.model,
        &grads.enc,
        &grads.dmu,
        &grads.dsigma,
        lr_backbone,
        lr_classifier,
        config.momentum,
        config.weight_decay,
    );
    if let Some(teacher) = state.teacher.as_mut() {
        ema_update(teacher, &state.model, config.ema_decay)?;
    }

    let pseudo_labels: Vec<PseudoLabelDiag> = if needs_pseudo {
        let truths = labels
            .iter()
            .map(|&y| (y, true))
            .chain(unlabeled.iter().map(|ex| (ex.diagnostic_label(), false)));
        pseudo
            .iter()
            .zip(truths)
            .map(|(&pl, (truth, from_labeled))| PseudoLabelDiag {
                pseudo: pl,
                correct: pl.class_index == truth,
                from_labeled,
            })
            .collect()
    } else {
        Vec::new()
    };

    let out = StepOutput {
        step: state.step,
        losses,
        total,
        lr_backbone,
        lr_classifier,
        pseudo_labels,
        mean_sigma: state.model.classifier.mean_effective_sigma(),
    };
    state.step += 1;
    Ok(out)
}

/// Top-1 accuracy (fraction in [0, 1]) of the model on `examples`, using
/// the mean prototypes: no augmentation, no sampling.
pub fn evaluate(model: &Model, examples: &[(ImageArray, usize)]) -> Result<f32, TrainerError> {
    if examples.is_empty() {
        return Err(TrainerError::EmptyBatch);
    }
    let w = mean_prototypes(&model.classifier);
    let tau = model.classifier.temperature;
    let mut correct = 0usize;
    for chunk in examples.chunks(64) {
        let images: Vec<ImageArray> = chunk.iter().map(|(img, _)| img.clone()).collect();
        let (z, _) = forward_images(&model.encoder, &images, false)?;
        let scores = cosine_scores(&z, &w, tau)?;
        for (row, (_, label)) in scores.probs.axis_iter(Axis(0)).zip(chunk) {
            let mut best = 0usize;
            let mut best_p = f32::NEG_INFINITY;
            for (c, &p) in row.iter().enumerate() {
                if p > best_p {
                    best_p = p;
                    best = c;
                }
            }
            if best == *label {
                correct += 1;
            }
        }
    }
    Ok(correct as f32 / examples.len() as f32)
}

/// Full training loop: builds the batch stream, initializes the state and
/// runs `config.steps` optimization steps, invoking `on_step` after each.
pub fn run_training<F>(
    split: &SsdgSplit,
    num_classes: usize,
    base_spec: &EncoderSpec,
    config: &TrainConfig,
    policy: &AugmentationPolicy,
    mut on_step: F,
) -> Result<TrainState, TrainerError>
where
    F: FnMut(&StepOutput),
{
    policy.validate()?;
    let mut state = TrainState::new(split, num_classes, base_spec, config)?;
    let stream = batch_stream(
        split,
        config.batch_labeled,
        config.batch_unlabeled,
        training_stream_seed(config.seed),
    )?;
    for bundle in stream.take(config.steps as usize) {
        let out = train_step(&mut state, &bundle, split, config, policy)?;
        on_step(&out);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use ssdg_data::{build_split, generate_synthetic, MultiDomainDataset, SynthConfig};

    fn tiny_dataset() -> MultiDomainDataset {
        generate_synthetic(
            &SynthConfig {
                num_domains: 3,
                num_classes: 3,
                samples_per_class_per_domain: 8,
                image_size: 16,
                ..SynthConfig::default()
            },
            0,
        )
        .unwrap()
    }

    fn tiny_spec() -> EncoderSpec {
        EncoderSpec {
            widths: vec![8, 8],
            output_dim: 8,
            ..EncoderSpec::default()
        }
    }

    fn tiny_config(method: Method) -> TrainConfig {
        TrainConfig {
            method,
            steps: 4,
            batch_labeled: 4,
            batch_unlabeled: 4,
            ..TrainConfig::default()
        }
    }

    fn param_checksum(model: &Model) -> f64 {
        model
            .to_named_tensors()
            .iter()
            .flat_map(|(_, _, data)| data.iter())
            .map(|&v| v as f64)
            .sum()
    }

    fn run(method: Method, seed: u64) -> TrainState {
        let ds = tiny_dataset();
        let split = build_split(&ds, 2, 2, 0).unwrap();
        let config = TrainConfig {
            seed,
            ..tiny_config(method)
        };
        run_training(
            &split,
            ds.num_classes,
            &tiny_spec(),
            &config,
            &AugmentationPolicy::default(),
            |_| {},
        )
        .unwrap()
    }

    #[test]
    fn identical_seeds_give_identical_parameters() {
        let a = run(Method::Stylematch, 5);
        let b = run(Method::Stylematch, 5);
        assert_eq!(a.model.to_named_tensors(), b.model.to_named_tensors());
        let c = run(Method::Stylematch, 6);
        assert_ne!(param_checksum(&a.model), param_checksum(&c.model));
    }

    #[test]
    fn vanilla_touches_no_unlabeled_terms() {
        let ds = tiny_dataset();
        let split = build_split(&ds, 2, 2, 0).unwrap();
        let config = tiny_config(Method::Vanilla);
        let mut outputs = Vec::new();
        run_training(
            &split,
            ds.num_classes,
            &tiny_spec(),
            &config,
            &AugmentationPolicy::default(),
            |out| outputs.push(out.clone()),
        )
        .unwrap();
        assert_eq!(outputs.len(), 4);
        for out in &outputs {
            assert_eq!(out.losses.strong, 0.0);
            assert_eq!(out.losses.style, 0.0);
            assert_eq!(out.losses.aux, 0.0);
            assert!(out.pseudo_labels.is_empty());
            assert_abs_diff_eq!(out.total, out.losses.labeled, epsilon = 1e-6);
        }
    }

    #[test]
    fn stylematch_reports_both_stream_pseudo_labels() {
        let ds = tiny_dataset();
        let split = build_split(&ds, 2, 2, 0).unwrap();
        let config = tiny_config(Method::Stylematch);
        let mut state = TrainState::new(&split, ds.num_classes, &tiny_spec(), &config).unwrap();
        let bundle = batch_stream(&split, 4, 4, 0).unwrap().next().unwrap();
        let out = train_step(
            &mut state,
            &bundle,
            &split,
            &config,
            &AugmentationPolicy::default(),
        )
        .unwrap();
        // 2 sources x (4 labeled + 4 unlabeled)
        assert_eq!(out.pseudo_labels.len(), 16);
        assert_eq!(out.pseudo_labels.iter().filter(|d| d.from_labeled).count(), 8);
        assert!(out.losses.labeled > 0.0);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn masked_gradient_is_zero_for_non_passing_rows() {
        let probs = array![[0.6f32, 0.4], [0.8, 0.2]];
        let pseudo = vec![
            PseudoLabel {
                class_index: 0,
                confidence: 0.6,
                passes: false,
            },
            PseudoLabel {
                class_index: 0,
                confidence: 0.8,
                passes: true,
            },
        ];
        let d = masked_ce_dlogits(&probs, &pseudo, 2);
        assert_eq!(d[[0, 0]], 0.0);
        assert_eq!(d[[0, 1]], 0.0);
        assert_abs_diff_eq!(d[[1, 0]], (0.8 - 1.0) / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(d[[1, 1]], 0.2 / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn ce_dlogits_matches_softmax_ce_identity() {
        let probs = array![[0.7f32, 0.2, 0.1], [0.1, 0.1, 0.8]];
        let d = ce_dlogits(&probs, &[0, 2]);
        assert_abs_diff_eq!(d[[0, 0]], (0.7 - 1.0) / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(d[[0, 1]], 0.2 / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(d[[1, 2]], (0.8 - 1.0) / 2.0, epsilon = 1e-6);
        // rows of the gradient sum to zero (softmax tangent space)
        for row in d.axis_iter(Axis(0)) {
            assert_abs_diff_eq!(row.sum(), 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn hidden_labels_do_not_influence_training() {
        // two splits identical except for the diagnostic labels on the
        // unlabeled pool: trained parameters must be bit-identical
        let ds = tiny_dataset();
        let split_a = build_split(&ds, 2, 2, 0).unwrap();
        let mut split_b = split_a.clone();
        let classes = ds.num_classes;
        for source in &mut split_b.sources {
            source.unlabeled = source
                .unlabeled
                .iter()
                .map(|ex| {
                    ssdg_data::UnlabeledExample::new(
                        ex.image.clone(),
                        ex.domain,
                        (ex.diagnostic_label() + 1) % classes,
                    )
                })
                .collect();
        }
        let config = tiny_config(Method::Fixmatch);
        let spec = tiny_spec();
        let policy = AugmentationPolicy::default();
        let a = run_training(&split_a, classes, &spec, &config, &policy, |_| {}).unwrap();
        let b = run_training(&split_b, classes, &spec, &config, &policy, |_| {}).unwrap();
        assert_eq!(a.model.to_named_tensors(), b.model.to_named_tensors());
    }

    #[test]
    fn mean_teacher_tracks_the_student() {
        let ds = tiny_dataset();
        let split = build_split(&ds, 2, 2, 0).unwrap();
        // decay 0 forces teacher == student after every step
        let config = TrainConfig {
            ema_decay: 0.0,
            ..tiny_config(Method::Meanteacher)
        };
        let state = run_training(
            &split,
            ds.num_classes,
            &tiny_spec(),
            &config,
            &AugmentationPolicy::default(),
            |_| {},
        )
        .unwrap();
        let teacher = state.teacher.as_ref().unwrap();
        assert_eq!(teacher.to_named_tensors(), state.model.to_named_tensors());
    }

    #[test]
    fn evaluate_is_a_valid_fraction_and_deterministic() {
        let ds = tiny_dataset();
        let split = build_split(&ds, 2, 2, 0).unwrap();
        let state = run(Method::Vanilla, 0);
        let target = &ds.examples[split.target_domain];
        let a = evaluate(&state.model, target).unwrap();
        let b = evaluate(&state.model, target).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn input_stats_are_sane() {
        let ds = tiny_dataset();
        let split = build_split(&ds, 0, 2, 0).unwrap();
        let (mean, std) = compute_input_stats(&split).unwrap();
        assert_eq!(mean.len(), 3);
        for (&m, &s) in mean.iter().zip(&std) {
            assert!((0.0..=1.0).contains(&m));
            assert!(s > 0.0 && s <= 0.5);
        }
    }

    #[test]
    fn every_method_runs_and_stays_finite() {
        for method in Method::ALL {
            let state = run(method, 1);
            assert_eq!(state.step, 4);
            assert!(param_checksum(&state.model).is_finite(), "{}", method.name());
        }
    }
}
