//! The acceptance gate. Runs every criterion in order and prints one
//! PASS/FAIL line each; exits nonzero when any fails.
//!
//! Criteria 1-5 are fast oracle and property checks. Criteria 6-9 train
//! the synthetic benchmark grid; completed cells are cached under
//! `target/acceptance-runs` and reused across invocations, so the first
//! run takes on the order of an hour and later runs are instant.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssdg_augment::{pick_style_source, t_style, StyleMode};
use ssdg_cli::{load_config, parse_config, run_ablation_matrix, run_experiment, AblationPreset};
use ssdg_data::{build_split, generate_synthetic, ImageArray, SynthConfig};
use ssdg_metrics::{read_metric_log, MetricRecord};
use ssdg_model::{
    classify, cosine_scores, cosine_scores_backward, images_to_input, init_classifier,
    prototype_backward, sample_prototypes, Encoder, EncoderSpec, Model,
};
use ssdg_trainer::{
    cross_entropy_mean, make_pseudo_label, masked_cross_entropy, Method, PseudoLabel, SgdState,
};

type Check = (&'static str, fn(&Ctx) -> Result<String, String>);

fn main() {
    let ctx = Ctx::new();
    let checks: Vec<Check> = vec![
        ("equation oracles", c1_equation_oracles),
        ("gradient checks", c2_gradient_checks),
        ("protocol exactness", c3_protocol_exactness),
        ("threshold semantics", c4_threshold_semantics),
        ("style-transfer invariant", c5_style_invariant),
        ("benchmark ordering", c6_benchmark_ordering),
        ("pseudo-label accuracy ordering", c7_pseudo_label_ordering),
        ("overconfidence diagnostic", c8_overconfidence),
        ("source-count scaling", c9_source_count),
        ("bit-identical reruns", c10_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check(&ctx) {
            Ok(detail) => println!("[PASS] criterion {:>2}: {name} — {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {:>2}: {name} — {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all {} criteria passed", checks.len());
}

/// Shared paths; the heavy benchmark cells live under target/ so a second
/// invocation reuses them.
struct Ctx {
    workspace: PathBuf,
    runs_root: PathBuf,
}

impl Ctx {
    fn new() -> Self {
        let workspace = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../..")
            .canonicalize()
            .expect("workspace root");
        let runs_root = workspace.join("target/acceptance-runs");
        Self {
            workspace,
            runs_root,
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// criterion 1: forward equations against independent f64 scalar loops

fn softmax_rows(logits: &Array2<f32>) -> Array2<f32> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn oracle_classify64(z: &[f64], w: &[Vec<f64>], tau: f64) -> Vec<f64> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let zn = norm(z);
    let cos: Vec<f64> = w
        .iter()
        .map(|row| {
            let dot: f64 = row.iter().zip(z).map(|(a, b)| a * b).sum();
            dot / (zn * norm(row))
        })
        .collect();
    let max = cos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = cos.iter().map(|c| ((c - max) / tau).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn c1_equation_oracles(_ctx: &Ctx) -> Result<String, String> {
    let mut rng = rng(11);
    let mut instances = 0usize;
    let mut worst = 0.0f64;
    let mut note = |err: f64, what: &str| -> Result<(), String> {
        worst = worst.max(err);
        if err > 1e-6 {
            return Err(format!("{what}: error {err:.2e} exceeds 1e-6"));
        }
        Ok(())
    };

    // labeled loss: mean cross-entropy against hard labels
    for _ in 0..120 {
        let n = rng.gen_range(1..=8);
        let c = rng.gen_range(2..=10);
        let logits = Array2::from_shape_fn((n, c), |_| rng.gen_range(-3.0..3.0f32));
        let probs = softmax_rows(&logits);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let got = cross_entropy_mean(&probs, &labels).map_err(|e| e.to_string())?;
        let want = -labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (probs[[i, l]] as f64).ln())
            .sum::<f64>()
            / n as f64;
        note((got as f64 - want).abs(), "labeled loss")?;
        instances += 1;
    }

    // strong-view and style-view losses: thresholded cross-entropy against
    // pseudo-labels over the full-batch divisor
    for round in 0..240 {
        let n = rng.gen_range(1..=8);
        let c = rng.gen_range(2..=10);
        let divisor = n + rng.gen_range(0..=8);
        let logits = Array2::from_shape_fn((n, c), |_| rng.gen_range(-3.0..3.0f32));
        let probs = softmax_rows(&logits);
        let pseudo: Vec<PseudoLabel> = (0..n)
            .map(|_| PseudoLabel {
                class_index: rng.gen_range(0..c),
                confidence: rng.gen_range(0.5..1.0),
                passes: rng.gen_bool(0.6),
            })
            .collect();
        let got = masked_cross_entropy(&probs, &pseudo, divisor).map_err(|e| e.to_string())?;
        let want = -pseudo
            .iter()
            .enumerate()
            .filter(|(_, pl)| pl.passes)
            .map(|(i, pl)| (probs[[i, pl.class_index]] as f64).ln())
            .sum::<f64>()
            / divisor as f64;
        let what = if round % 2 == 0 {
            "strong-view loss"
        } else {
            "style-view loss"
        };
        note((got as f64 - want).abs(), what)?;
        instances += 1;
    }

    // reparameterized prototype draw
    for _ in 0..120 {
        let c = rng.gen_range(2..=6);
        let d = rng.gen_range(2..=12);
        let params = ssdg_model::StochasticClassifierParams {
            mu: Array2::from_shape_fn((c, d), |_| rng.gen_range(-1.5..1.5f32)),
            sigma_raw: Array2::from_shape_fn((c, d), |_| rng.gen_range(-4.0..2.0f32)),
            temperature: 0.05,
        };
        let noise = Array2::from_shape_fn((c, d), |_| rng.gen_range(-2.0..2.0f32));
        let w = sample_prototypes(&params, &noise).map_err(|e| e.to_string())?;
        for i in 0..c {
            for j in 0..d {
                let want = params.mu[[i, j]] as f64
                    + (1.0 + (params.sigma_raw[[i, j]] as f64).exp()).ln() * noise[[i, j]] as f64;
                note((w[[i, j]] as f64 - want).abs(), "prototype sample")?;
            }
        }
        instances += 1;
    }

    // cosine-softmax classification head
    for _ in 0..120 {
        let c = rng.gen_range(2..=8);
        let d = rng.gen_range(2..=16);
        let tau = [0.05f32, 0.1, 0.5, 1.0][rng.gen_range(0..4)];
        let z = Array1::from_shape_fn(d, |_| rng.gen_range(-1.0..1.0f32) + 0.05);
        let w = Array2::from_shape_fn((c, d), |_| rng.gen_range(-1.0..1.0f32) + 0.05);
        let got = classify(&z, &w, tau).map_err(|e| e.to_string())?;
        let z64: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let w64: Vec<Vec<f64>> = w
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        let want = oracle_classify64(&z64, &w64, tau as f64);
        for (g, e) in got.iter().zip(&want) {
            note((*g as f64 - e).abs(), "classify")?;
        }
        instances += 1;
    }

    Ok(format!(
        "{instances} random instances, max |error| {worst:.1e} (tolerance 1e-6)"
    ))
}

// ---------------------------------------------------------------------------
// criterion 2: classifier gradients vs f64 central differences

/// f64 replica of the classifier loss: mean CE of the cosine softmax over
/// reparameterized prototypes.
fn loss64(
    mu: &Array2<f64>,
    sigma_raw: &Array2<f64>,
    noise: &Array2<f64>,
    z: &Array2<f64>,
    labels: &[usize],
    tau: f64,
) -> f64 {
    let (c, d) = mu.dim();
    let w: Vec<Vec<f64>> = (0..c)
        .map(|i| {
            (0..d)
                .map(|j| mu[[i, j]] + (1.0 + sigma_raw[[i, j]].exp()).ln() * noise[[i, j]])
                .collect()
        })
        .collect();
    let mut total = 0.0;
    for (n, &label) in labels.iter().enumerate() {
        let zr: Vec<f64> = z.row(n).to_vec();
        let probs = oracle_classify64(&zr, &w, tau);
        total -= probs[label].ln();
    }
    total / labels.len() as f64
}

fn c2_gradient_checks(_ctx: &Ctx) -> Result<String, String> {
    let mut rng = rng(17);
    let mut worst = 0.0f64;
    for instance in 0..20 {
        let c = rng.gen_range(2..=5);
        let d = rng.gen_range(2..=8);
        let n = rng.gen_range(1..=6);
        let tau = if instance % 4 == 0 { 0.5 } else { 0.05f32 };
        let params = ssdg_model::StochasticClassifierParams {
            mu: Array2::from_shape_fn((c, d), |_| rng.gen_range(-1.0..1.0f32)),
            sigma_raw: Array2::from_shape_fn((c, d), |_| rng.gen_range(-3.0..1.0f32)),
            temperature: tau,
        };
        let noise = Array2::from_shape_fn((c, d), |_| rng.gen_range(-1.5..1.5f32));
        let z = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0f32) + 0.03);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();

        // analytic path through the f32 implementation
        let w = sample_prototypes(&params, &noise).map_err(|e| e.to_string())?;
        let scores = cosine_scores(&z, &w, tau).map_err(|e| e.to_string())?;
        let mut dlogits = scores.probs.clone();
        for (i, &l) in labels.iter().enumerate() {
            dlogits[[i, l]] -= 1.0;
        }
        dlogits.mapv_inplace(|v| v / n as f32);
        let (_dz, dw) = cosine_scores_backward(&scores, &dlogits);
        let (dmu, dsigma) = prototype_backward(&params, &noise, &dw);

        // central differences on the f64 replica
        let mu64 = params.mu.mapv(|v| v as f64);
        let s64 = params.sigma_raw.mapv(|v| v as f64);
        let n64 = noise.mapv(|v| v as f64);
        let z64 = z.mapv(|v| v as f64);
        let h = 1e-4;
        for i in 0..c {
            for j in 0..d {
                for (which, analytic) in [("mu", dmu[[i, j]]), ("sigma_raw", dsigma[[i, j]])] {
                    let mut plus = (mu64.clone(), s64.clone());
                    let mut minus = (mu64.clone(), s64.clone());
                    let (p, m) = if which == "mu" {
                        (&mut plus.0, &mut minus.0)
                    } else {
                        (&mut plus.1, &mut minus.1)
                    };
                    p[[i, j]] += h;
                    m[[i, j]] -= h;
                    let fd = (loss64(&plus.0, &plus.1, &n64, &z64, &labels, tau as f64)
                        - loss64(&minus.0, &minus.1, &n64, &z64, &labels, tau as f64))
                        / (2.0 * h);
                    let a = analytic as f64;
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
                    worst = worst.max(rel);
                    if rel > 1e-3 {
                        return Err(format!(
                            "d{which}[{i},{j}]: analytic {a:.6e} vs fd {fd:.6e} (rel {rel:.2e})"
                        ));
                    }
                }
            }
        }
    }
    Ok(format!(
        "20 instances, max relative error {worst:.1e} (tolerance 1e-3)"
    ))
}

// ---------------------------------------------------------------------------
// criterion 3: split label counts

fn c3_protocol_exactness(_ctx: &Ctx) -> Result<String, String> {
    let small = SynthConfig {
        num_domains: 4,
        num_classes: 7,
        samples_per_class_per_domain: 12,
        image_size: 16,
        ..SynthConfig::default()
    };
    let ds = generate_synthetic(&small, 0).map_err(|e| e.to_string())?;
    let split = build_split(&ds, 3, 10, 0).map_err(|e| e.to_string())?;
    if split.total_labeled() != 210 {
        return Err(format!(
            "7 classes x 10 labels x 3 sources gave {} labels, want 210",
            split.total_labeled()
        ));
    }

    let wide = SynthConfig {
        num_domains: 4,
        num_classes: 65,
        samples_per_class_per_domain: 6,
        image_size: 16,
        ..SynthConfig::default()
    };
    let ds = generate_synthetic(&wide, 0).map_err(|e| e.to_string())?;
    let split = build_split(&ds, 0, 5, 1).map_err(|e| e.to_string())?;
    if split.total_labeled() != 975 {
        return Err(format!(
            "65 classes x 5 labels x 3 sources gave {} labels, want 975",
            split.total_labeled()
        ));
    }
    Ok("210 and 975 labels exactly".into())
}

// ---------------------------------------------------------------------------
// criterion 4: threshold boundary + zero influence of non-passing rows

fn q_with_max(confidence: f32, classes: usize, arg: usize) -> Array1<f32> {
    let rest = (1.0 - confidence) / (classes - 1) as f32;
    Array1::from_shape_fn(classes, |i| if i == arg { confidence } else { rest })
}

fn c4_threshold_semantics(_ctx: &Ctx) -> Result<String, String> {
    // boundary: passing set is exactly {confidence >= 0.95}
    for (conf, should_pass) in [
        (0.9499f32, false),
        (0.95, true),
        (0.9501, true),
        (0.5, false),
        (0.999, true),
    ] {
        let q = q_with_max(conf, 4, 1);
        let pl = make_pseudo_label(q.view(), 0.95).map_err(|e| e.to_string())?;
        if pl.passes != should_pass {
            return Err(format!(
                "confidence {conf} gave passes = {}, want {should_pass}",
                pl.passes
            ));
        }
        if pl.class_index != 1 {
            return Err(format!("argmax {} for confidence {conf}", pl.class_index));
        }
    }

    // removing non-passing examples leaves the SGD update unchanged
    let mut rng = rng(23);
    let spec = EncoderSpec {
        widths: vec![8, 8],
        output_dim: 8,
        input_mean: vec![0.5; 3],
        input_std: vec![0.25; 3],
    };
    let encoder = Encoder::new(spec.clone(), 5).map_err(|e| e.to_string())?;
    let mut classifier = init_classifier(4, 8, 7);
    classifier.temperature = 0.5; // keep the small-batch probs off the saturation plateau
    let model = Model::new(encoder, classifier).map_err(|e| e.to_string())?;
    let images: Vec<ImageArray> = (0..6)
        .map(|_| {
            ImageArray::new(Array3::from_shape_fn((16, 16, 3), |_| rng.gen_range(0.0..1.0)))
                .unwrap()
        })
        .collect();
    let passes = [true, false, true, false, false, true];
    let pseudo: Vec<PseudoLabel> = passes
        .iter()
        .map(|&p| PseudoLabel {
            class_index: rng.gen_range(0..4),
            confidence: if p { 0.99 } else { 0.5 },
            passes: p,
        })
        .collect();
    let noise = Array2::from_shape_fn((4, 8), |_| rng.gen_range(-1.0..1.0f32));
    let divisor = images.len();

    let update = |keep: &dyn Fn(usize) -> bool| -> Result<Model, String> {
        let idx: Vec<usize> = (0..images.len()).filter(|&i| keep(i)).collect();
        let batch: Vec<&ImageArray> = idx.iter().map(|&i| &images[i]).collect();
        let pls: Vec<PseudoLabel> = idx.iter().map(|&i| pseudo[i]).collect();
        let mut m = model.clone();
        let input = images_to_input(batch, &spec).map_err(|e| e.to_string())?;
        let (features, cache) = m
            .encoder
            .forward(&input, 16, 16, true)
            .map_err(|e| e.to_string())?;
        let w = sample_prototypes(&m.classifier, &noise).map_err(|e| e.to_string())?;
        let scores =
            cosine_scores(&features, &w, m.classifier.temperature).map_err(|e| e.to_string())?;
        let mut dlogits = Array2::<f32>::zeros(scores.probs.dim());
        for (row, pl) in pls.iter().enumerate() {
            if pl.passes {
                for c in 0..4 {
                    let onehot = (c == pl.class_index) as u8 as f32;
                    dlogits[[row, c]] = (scores.probs[[row, c]] - onehot) / divisor as f32;
                }
            }
        }
        let (dz, dw) = cosine_scores_backward(&scores, &dlogits);
        let (dmu, dsigma) = prototype_backward(&m.classifier, &noise, &dw);
        let mut grads = m.encoder.zero_grads();
        m.encoder.backward(cache.as_ref().unwrap(), &dz, &mut grads);
        let mut opt = SgdState::new(&m);
        opt.apply(&mut m, &grads, &dmu, &dsigma, 0.003, 0.01, 0.9, 5e-4);
        Ok(m)
    };

    let full = update(&|_| true)?;
    let pruned = update(&|i| passes[i])?;
    let mut max_diff = 0.0f32;
    let pairs = full
        .to_named_tensors()
        .into_iter()
        .zip(pruned.to_named_tensors());
    for ((name, _, a), (_, _, b)) in pairs {
        for (x, y) in a.iter().zip(&b) {
            let diff = (x - y).abs();
            if diff > max_diff {
                max_diff = diff;
            }
            if diff > 1e-7 {
                return Err(format!("{name}: update differs by {diff:.2e} (tolerance 1e-7)"));
            }
        }
    }
    Ok(format!(
        "boundary exact; pruning non-passing rows moves the update by at most {max_diff:.1e}"
    ))
}

// ---------------------------------------------------------------------------
// criterion 5: style statistic matching + cross-domain partner selection

fn channel_stats64(pixels: &Array3<f32>, channel: usize) -> (f64, f64) {
    let slice = pixels.index_axis(ndarray::Axis(2), channel);
    let n = slice.len() as f64;
    let mean = slice.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = slice
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

fn c5_style_invariant(_ctx: &Ctx) -> Result<String, String> {
    let mut rng = rng(31);
    let mut worst = 0.0f64;
    // pairs built so the transferred values stay inside [0, 1]: the clip is
    // the identity and the post-clip statistics equal the pre-clip ones
    for _ in 0..1000 {
        let content = ImageArray::new(Array3::from_shape_fn((8, 8, 3), |_| {
            rng.gen_range(0.4..0.6f32)
        }))
        .unwrap();
        let style = ImageArray::new(Array3::from_shape_fn((8, 8, 3), |(_, _, c)| {
            0.45 + 0.02 * c as f32 + rng.gen_range(-0.04..0.04f32)
        }))
        .unwrap();
        let out = t_style(&content, &style, 1e-5).map_err(|e| e.to_string())?;
        for c in 0..3 {
            let (m_out, s_out) = channel_stats64(out.pixels(), c);
            let (m_sty, s_sty) = channel_stats64(style.pixels(), c);
            let err = (m_out - m_sty).abs().max((s_out - s_sty).abs());
            worst = worst.max(err);
            if err > 1e-4 {
                return Err(format!(
                    "channel {c}: stats off by {err:.2e} (tolerance 1e-4)"
                ));
            }
        }
    }

    let ds = generate_synthetic(
        &SynthConfig {
            num_domains: 4,
            num_classes: 7,
            samples_per_class_per_domain: 4,
            image_size: 16,
            ..SynthConfig::default()
        },
        0,
    )
    .map_err(|e| e.to_string())?;
    let split = build_split(&ds, 3, 2, 0).map_err(|e| e.to_string())?;
    for draw in 0..10_000 {
        let query = rng.gen_range(0..split.sources.len());
        let pool = split.sources[query].labeled.len() + split.sources[query].unlabeled.len();
        let index = rng.gen_range(0..pool);
        let pick = pick_style_source(query, index, &split, StyleMode::CrossDomain, &mut rng)
            .map_err(|e| e.to_string())?;
        if pick.domain == split.sources[query].domain || pick.mode_used != StyleMode::CrossDomain {
            return Err(format!(
                "draw {draw}: partner domain {} for query domain {}",
                pick.domain, split.sources[query].domain
            ));
        }
    }
    Ok(format!(
        "1000 pairs, max stat error {worst:.1e}; 10000 cross-domain draws never hit the query domain"
    ))
}

// ---------------------------------------------------------------------------
// criteria 6-8: the shared benchmark grid

struct Benchmark {
    /// (method name, mean accuracy over seeds)
    accuracy: Vec<(String, f32)>,
    root: PathBuf,
    seeds: Vec<u64>,
    steps: u64,
}

fn benchmark(ctx: &Ctx) -> Result<&'static Benchmark, String> {
    use std::sync::OnceLock;
    static CELL: OnceLock<Result<Benchmark, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut config = load_config(&ctx.workspace.join("configs/benchmark.toml"), &[])
            .map_err(|e| e.to_string())?;
        config.output.run_root = ctx.runs_root.clone();
        eprintln!("(training benchmark grid; cached cells under target/acceptance-runs are reused)");
        let summary = run_experiment(
            &config,
            &[
                Method::Vanilla,
                Method::Fixmatch,
                Method::FixmatchSnn,
                Method::Stylematch,
            ],
        )
        .map_err(|e| e.to_string())?;
        if !summary.failures.is_empty() {
            return Err(format!("cells failed: {:?}", summary.failures));
        }
        let mut accuracy = Vec::new();
        for method in ["vanilla", "fixmatch", "fixmatch_snn", "stylematch"] {
            let accs: Vec<f32> = summary
                .rows
                .iter()
                .filter(|r| r.method == method)
                .map(|r| r.accuracy)
                .collect();
            if accs.is_empty() {
                return Err(format!("no rows for {method}"));
            }
            accuracy.push((
                method.to_string(),
                accs.iter().sum::<f32>() / accs.len() as f32,
            ));
        }
        Ok(Benchmark {
            accuracy,
            root: summary.root,
            seeds: config.protocol.seeds.clone(),
            steps: config.method.steps,
        })
    })
    .as_ref()
    .map_err(|e| e.clone())
}

fn cell_log(bench: &Benchmark, method: &str, seed: u64) -> Result<Vec<MetricRecord>, String> {
    let path = bench
        .root
        .join(method)
        .join("domain3")
        .join(format!("seed{seed}"))
        .join("metrics.log");
    let file = fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    read_metric_log(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))
}

/// Mean of a per-record statistic over the final quarter of training.
fn final_quarter_mean(
    records: &[MetricRecord],
    steps: u64,
    stat: impl Fn(&MetricRecord) -> Option<f32>,
) -> Option<f32> {
    let cut = steps - steps / 4;
    let values: Vec<f32> = records
        .iter()
        .filter(|r| r.step > cut)
        .filter_map(&stat)
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f32>() / values.len() as f32)
}

fn c6_benchmark_ordering(ctx: &Ctx) -> Result<String, String> {
    let bench = benchmark(ctx)?;
    let acc = |m: &str| {
        bench
            .accuracy
            .iter()
            .find(|(name, _)| name == m)
            .map(|&(_, a)| a)
            .unwrap()
    };
    let (va, fm, sm) = (acc("vanilla"), acc("fixmatch"), acc("stylematch"));
    let detail = format!(
        "mean target accuracy: vanilla {:.1}%, fixmatch {:.1}%, stylematch {:.1}%",
        va * 100.0,
        fm * 100.0,
        sm * 100.0
    );
    if sm - fm < 0.01 {
        return Err(format!("{detail}; stylematch-fixmatch gap below 1 point"));
    }
    if fm - va < 0.01 {
        return Err(format!("{detail}; fixmatch-vanilla gap below 1 point"));
    }
    Ok(detail)
}

fn c7_pseudo_label_ordering(ctx: &Ctx) -> Result<String, String> {
    let bench = benchmark(ctx)?;
    let mean_pla = |method: &str| -> Result<f32, String> {
        let mut total = 0.0;
        for &seed in &bench.seeds {
            let records = cell_log(bench, method, seed)?;
            total += final_quarter_mean(&records, bench.steps, |r| r.pseudo_label_accuracy)
                .ok_or_else(|| format!("{method} seed{seed}: no pseudo-label records"))?;
        }
        Ok(total / bench.seeds.len() as f32)
    };
    let fm = mean_pla("fixmatch")?;
    let sm = mean_pla("stylematch")?;
    let detail = format!(
        "final-quarter pseudo-label accuracy: fixmatch {:.1}%, stylematch {:.1}%",
        fm * 100.0,
        sm * 100.0
    );
    if sm <= fm {
        return Err(detail);
    }
    Ok(detail)
}

fn c8_overconfidence(ctx: &Ctx) -> Result<String, String> {
    let bench = benchmark(ctx)?;

    // an interval where the overconfidence rate overshoots accuracy exists
    // in the deterministic fixmatch run (window-smoothed to rule out
    // single-step noise)
    let window = 20;
    let mut overshoot_seeds = 0;
    for &seed in &bench.seeds {
        let records = cell_log(bench, "fixmatch", seed)?;
        let gaps: Vec<f32> = records
            .iter()
            .filter_map(|r| Some(r.overconfidence_rate? - r.pseudo_label_accuracy?))
            .collect();
        let exists = gaps
            .windows(window)
            .any(|w| w.iter().sum::<f32>() / window as f32 > 0.0);
        if exists {
            overshoot_seeds += 1;
        }
    }
    if overshoot_seeds == 0 {
        return Err("no fixmatch run shows an overconfidence overshoot interval".into());
    }

    // the stochastic classifier shrinks the terminal gap
    let terminal_gap = |method: &str| -> Result<f32, String> {
        let mut total = 0.0;
        for &seed in &bench.seeds {
            let records = cell_log(bench, method, seed)?;
            total += final_quarter_mean(&records, bench.steps, |r| {
                Some(r.overconfidence_rate? - r.pseudo_label_accuracy?)
            })
            .ok_or_else(|| format!("{method} seed{seed}: no diagnostic records"))?;
        }
        Ok(total / bench.seeds.len() as f32)
    };
    let fm = terminal_gap("fixmatch")?;
    let snn = terminal_gap("fixmatch_snn")?;
    let detail = format!(
        "overshoot interval in {overshoot_seeds}/{} fixmatch runs; terminal gap fixmatch {:+.3}, fixmatch_snn {:+.3}",
        bench.seeds.len(),
        fm,
        snn
    );
    if snn >= fm {
        return Err(detail);
    }
    Ok(detail)
}

// ---------------------------------------------------------------------------
// criterion 9: stylematch vs fixmatch across source counts

fn c9_source_count(ctx: &Ctx) -> Result<String, String> {
    let mut config = load_config(
        &ctx.workspace.join("configs/benchmark.toml"),
        &["protocol.seeds=[0]".into(), "method.steps=2000".into()],
    )
    .map_err(|e| e.to_string())?;
    config.output.run_root = ctx.runs_root.clone();
    eprintln!("(training source-count ablation; cached cells are reused)");
    let summaries =
        run_ablation_matrix(&config, AblationPreset::NumSources).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for (label, summary) in &summaries {
        if !summary.failures.is_empty() {
            return Err(format!("{label}: cells failed: {:?}", summary.failures));
        }
        let acc = |m: &str| {
            summary
                .rows
                .iter()
                .find(|r| r.method == m)
                .map(|r| r.accuracy)
        };
        let fm = acc("fixmatch").ok_or_else(|| format!("{label}: no fixmatch row"))?;
        let sm = acc("stylematch").ok_or_else(|| format!("{label}: no stylematch row"))?;
        detail.push(format!(
            "{label}: stylematch {:.1}% vs fixmatch {:.1}%",
            sm * 100.0,
            fm * 100.0
        ));
        if sm < fm {
            return Err(format!("{}; stylematch below fixmatch", detail.join("; ")));
        }
    }
    Ok(detail.join("; "))
}

// ---------------------------------------------------------------------------
// criterion 10: bit-identical cell reruns

fn c10_reproducibility(_ctx: &Ctx) -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = parse_config(
        &format!(
            r#"
[dataset]
kind = "synthetic"
[dataset.synth]
num_domains = 3
num_classes = 4
samples_per_class_per_domain = 8
[protocol]
labels_per_class = 2
seeds = [3]
targets = ["domain2"]
[method]
steps = 25
batch_labeled = 8
batch_unlabeled = 8
[output]
run_root = "{}"
"#,
            tmp.path().display()
        ),
        &[],
    )
    .map_err(|e| e.to_string())?;
    let first = run_experiment(&config, &[Method::Stylematch]).map_err(|e| e.to_string())?;
    if !first.failures.is_empty() {
        return Err(format!("first run failed: {:?}", first.failures));
    }
    let cell = first.root.join("stylematch/domain2/seed3");
    let row = fs::read(cell.join("result.row")).map_err(|e| e.to_string())?;
    let log = fs::read(cell.join("metrics.log")).map_err(|e| e.to_string())?;
    fs::remove_file(cell.join("result.row")).map_err(|e| e.to_string())?;
    fs::remove_file(cell.join("metrics.log")).map_err(|e| e.to_string())?;
    let second = run_experiment(&config, &[Method::Stylematch]).map_err(|e| e.to_string())?;
    if second.skipped != 0 || !second.failures.is_empty() {
        return Err("rerun did not retrain the cell".into());
    }
    let row2 = fs::read(cell.join("result.row")).map_err(|e| e.to_string())?;
    let log2 = fs::read(cell.join("metrics.log")).map_err(|e| e.to_string())?;
    if row != row2 {
        return Err("result row differs between identical runs".into());
    }
    if log != log2 {
        return Err("metrics log differs between identical runs".into());
    }
    Ok(format!(
        "result row ({} bytes) and metrics log ({} bytes) reproduced bit-identically",
        row.len(),
        log.len()
    ))
}
