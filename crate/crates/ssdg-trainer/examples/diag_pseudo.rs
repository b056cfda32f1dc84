//! Pseudo-label calibration probe: coverage, accuracy and precision of the
//! passing set over training, plus periodic target accuracy.
//! Run with: cargo run --release -p ssdg-trainer --example diag_pseudo \
//!   [method] [labels_per_class] [lr_backbone] [lr_classifier] [steps] [seed]

use ssdg_augment::AugmentationPolicy;
use ssdg_data::{batch_stream, build_split, generate_synthetic, SynthConfig};
use ssdg_model::EncoderSpec;
use ssdg_trainer::{evaluate, train_step, training_stream_seed, Method, TrainConfig, TrainState};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let method = Method::parse(args.get(1).map(String::as_str).unwrap_or("fixmatch")).unwrap();
    let lpc: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(5);
    let lr_b: f32 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.02);
    let lr_c: f32 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let steps: u64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let seed: u64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(0);

    let ds = generate_synthetic(&SynthConfig::default(), 0).unwrap();
    let split = build_split(&ds, 3, lpc, seed).unwrap();
    let mut policy = AugmentationPolicy::default();
    policy.strong.magnitude = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(5);
    policy.strong.cutout_fraction = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(0.35);
    if let Some(p) = args.get(10) {
        policy.weak.crop_padding = p.parse().unwrap();
    }
    let config = TrainConfig {
        method,
        steps,
        lr_backbone: lr_b,
        lr_classifier: lr_c,
        seed,
        temperature: args.get(9).map(|s| s.parse().unwrap()).unwrap_or(0.05),
        ..TrainConfig::default()
    };
    let mut state = TrainState::new(&split, ds.num_classes, &EncoderSpec::default(), &config).unwrap();
    let stream = batch_stream(
        &split,
        config.batch_labeled,
        config.batch_unlabeled,
        training_stream_seed(seed),
    )
    .unwrap();

    // accumulators over a reporting window, unlabeled stream only
    let (mut pass, mut pass_ok, mut all, mut all_ok) = (0usize, 0usize, 0usize, 0usize);
    let window = (steps / 20).max(1);
    for bundle in stream.take(steps as usize) {
        let out = train_step(&mut state, &bundle, &split, &config, &policy).unwrap();
        for d in out.pseudo_labels.iter().filter(|d| !d.from_labeled) {
            all += 1;
            all_ok += d.correct as usize;
            if d.pseudo.passes {
                pass += 1;
                pass_ok += d.correct as usize;
            }
        }
        if (out.step + 1) % window == 0 {
            let acc = evaluate(&state.model, &ds.examples[split.target_domain]).unwrap();
            println!(
                "step {:5}  cov {:.3}  pla {:.3}  precision {:.3}  target {:.3}",
                out.step + 1,
                pass as f64 / all.max(1) as f64,
                all_ok as f64 / all.max(1) as f64,
                pass_ok as f64 / pass.max(1) as f64,
                acc
            );
            pass = 0;
            pass_ok = 0;
            all = 0;
            all_ok = 0;
        }
    }
    for &d in &split.source_domains {
        let acc = evaluate(&state.model, &ds.examples[d]).unwrap();
        println!("source domain{d} accuracy {acc:.3}");
    }
}
