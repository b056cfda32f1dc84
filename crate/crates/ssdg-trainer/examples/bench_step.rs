//! Wall-clock timing of one training step at the default benchmark scale.
//! Run with: cargo run --release -p ssdg-trainer --example bench_step [method]

use std::time::Instant;

use ssdg_augment::AugmentationPolicy;
use ssdg_data::{batch_stream, build_split, generate_synthetic, SynthConfig};
use ssdg_model::EncoderSpec;
use ssdg_trainer::{train_step, Method, TrainConfig, TrainState};

fn main() {
    let method = std::env::args()
        .nth(1)
        .map(|m| Method::parse(&m).expect("unknown method"))
        .unwrap_or(Method::Stylematch);
    let ds = generate_synthetic(
        &SynthConfig {
            samples_per_class_per_domain: 20,
            ..SynthConfig::default()
        },
        0,
    )
    .unwrap();
    let split = build_split(&ds, 3, 5, 0).unwrap();
    let config = TrainConfig {
        method,
        ..TrainConfig::default()
    };
    let mut state = TrainState::new(&split, ds.num_classes, &EncoderSpec::default(), &config).unwrap();
    let policy = AugmentationPolicy::default();
    let mut stream = batch_stream(&split, config.batch_labeled, config.batch_unlabeled, 0).unwrap();

    // warm-up
    let bundle = stream.next().unwrap();
    train_step(&mut state, &bundle, &split, &config, &policy).unwrap();

    let n = 5;
    let start = Instant::now();
    for _ in 0..n {
        let bundle = stream.next().unwrap();
        train_step(&mut state, &bundle, &split, &config, &policy).unwrap();
    }
    let per_step = start.elapsed().as_secs_f64() / n as f64;
    println!("{}: {:.3} s/step -> {:.1} min per 2000 steps", method.name(), per_step, per_step * 2000.0 / 60.0);
}
