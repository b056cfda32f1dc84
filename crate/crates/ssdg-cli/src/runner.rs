use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ssdg_data::{batch_stream, build_split_with_sources, MultiDomainDataset};
use ssdg_metrics::{aggregate, write_metric_record, MetricRecord, ResultsTable, RunResult};
use ssdg_model::{save_checkpoint, CheckpointMeta, EncoderSpec};
use ssdg_trainer::{evaluate, train_step, training_stream_seed, Method, TrainConfig, TrainState};

use crate::config::ExperimentConfig;
use crate::CliError;

/// What a benchmark invocation did.
#[derive(Debug)]
pub struct RunSummary {
    pub hash: String,
    /// runs/<hash>
    pub root: PathBuf,
    pub rows: Vec<RunResult>,
    /// cells satisfied from existing result files
    pub skipped: usize,
    /// (cell id, error text) for cells that failed; siblings keep running
    pub failures: Vec<(String, String)>,
    /// aggregate over the completed grid; absent when any cell failed
    pub table: Option<ResultsTable>,
}

/// Replaces `path` atomically: write to a sibling temp file, then rename.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if k > items.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Runs the full (methods x targets x seeds) grid for one config,
/// skipping cells whose results already exist under the config-hash
/// directory, then aggregates.
pub fn run_experiment(
    config: &ExperimentConfig,
    methods: &[Method],
) -> Result<RunSummary, CliError> {
    config.validate()?;
    if methods.is_empty() {
        return Err(CliError::Config("no methods requested".into()));
    }
    let dataset = config.dataset.load()?;
    let targets = config.resolve_targets(&dataset)?;
    let hash = config.config_hash();
    let root = config.run_root().join(&hash);
    fs::create_dir_all(&root)?;
    let snapshot = root.join("config.toml");
    if !snapshot.exists() {
        let text = toml::to_string_pretty(config)
            .map_err(|e| CliError::Config(format!("config serialization: {e}")))?;
        atomic_write(&snapshot, text.as_bytes())?;
    }

    let mut rows = Vec::new();
    let mut skipped = 0usize;
    let mut failures = Vec::new();
    for &method in methods {
        for &target in &targets {
            for &seed in &config.protocol.seeds {
                let cell = format!(
                    "{}/{}/seed{}",
                    method.name(),
                    dataset.domains[target],
                    seed
                );
                match run_cell(config, &dataset, method, target, seed, &root, &hash) {
                    Ok((row, was_skipped)) => {
                        rows.push(row);
                        if was_skipped {
                            skipped += 1;
                        }
                    }
                    Err(e) => failures.push((cell, e.to_string())),
                }
            }
        }
    }

    let table = if failures.is_empty() && !rows.is_empty() {
        let table = aggregate(&rows)?;
        atomic_write(&root.join("results.csv"), table.to_csv().as_bytes())?;
        atomic_write(&root.join("results.txt"), table.to_aligned_text().as_bytes())?;
        Some(table)
    } else {
        None
    };
    Ok(RunSummary {
        hash,
        root,
        rows,
        skipped,
        failures,
        table,
    })
}

/// One benchmark cell: train (averaging over source subsets when
/// `protocol.num_sources` is below the available count), evaluate on the
/// full target domain, and persist metrics + checkpoint + result row.
fn run_cell(
    config: &ExperimentConfig,
    dataset: &MultiDomainDataset,
    method: Method,
    target: usize,
    seed: u64,
    root: &Path,
    hash: &str,
) -> Result<(RunResult, bool), CliError> {
    let cell_dir = root
        .join(method.name())
        .join(&dataset.domains[target])
        .join(format!("seed{seed}"));
    let result_path = cell_dir.join("result.row");
    if result_path.exists() {
        let row: RunResult = serde_json::from_str(&fs::read_to_string(&result_path)?)
            .map_err(|e| CliError::Report(format!("{}: {e}", result_path.display())))?;
        return Ok((row, true));
    }
    fs::create_dir_all(&cell_dir)?;

    let all_sources: Vec<usize> = (0..dataset.domains.len()).filter(|&d| d != target).collect();
    let subsets = match config.protocol.num_sources {
        None => vec![all_sources],
        Some(k) => {
            if k == 0 || k > all_sources.len() {
                return Err(CliError::Config(format!(
                    "protocol.num_sources = {k} impossible with {} non-target domains",
                    all_sources.len()
                )));
            }
            combinations(&all_sources, k)
        }
    };
    let single = subsets.len() == 1;

    let train_config = TrainConfig {
        method,
        seed,
        ..config.method.clone()
    };
    let mut accuracies = Vec::with_capacity(subsets.len());
    for (i, sources) in subsets.iter().enumerate() {
        let split = build_split_with_sources(
            dataset,
            target,
            Some(sources),
            config.protocol.labels_per_class,
            seed,
        )?;
        let log_path = if single {
            cell_dir.join("metrics.log")
        } else {
            cell_dir.join(format!("metrics-{i}.log"))
        };
        let mut log = BufWriter::new(fs::File::create(&log_path)?);
        let mut state = TrainState::new(&split, dataset.num_classes, &EncoderSpec::default(), &train_config)?;
        let mut stream = batch_stream(
            &split,
            train_config.batch_labeled,
            train_config.batch_unlabeled,
            training_stream_seed(train_config.seed),
        )?;
        while state.step < train_config.steps {
            let bundle = stream.next().expect("stream is infinite");
            let out = train_step(&mut state, &bundle, &split, &train_config, &config.augment)?;
            let record = MetricRecord::from_step(&out, train_config.confidence_threshold, true, false)?;
            write_metric_record(&mut log, &record)?;
            let interval = config.output.checkpoint_interval;
            if i == 0 && interval > 0 && state.step % interval == 0 && state.step < train_config.steps {
                save_model(&cell_dir.join(format!("checkpoint-step{}", state.step)), &state, hash, seed)?;
            }
        }
        log.flush()?;
        if i == 0 {
            save_model(&cell_dir.join("checkpoint"), &state, hash, seed)?;
        }
        // the mean-teacher baseline predicts with its EMA model
        let eval_model = state.teacher.as_ref().unwrap_or(&state.model);
        accuracies.push(evaluate(eval_model, &dataset.examples[target])?);
    }
    let accuracy = accuracies.iter().sum::<f32>() / accuracies.len() as f32;
    if !single {
        let detail = serde_json::to_string_pretty(&accuracies)
            .map_err(|e| CliError::Report(e.to_string()))?;
        atomic_write(&cell_dir.join("subset_accuracies.json"), detail.as_bytes())?;
    }
    let row = RunResult {
        method: method.name().to_string(),
        target: dataset.domains[target].clone(),
        seed,
        accuracy,
    };
    let json = serde_json::to_string(&row).map_err(|e| CliError::Report(e.to_string()))?;
    atomic_write(&result_path, json.as_bytes())?;
    Ok((row, false))
}

fn save_model(path: &Path, state: &TrainState, hash: &str, seed: u64) -> Result<(), CliError> {
    let meta = CheckpointMeta {
        step: state.step,
        config_hash: hash.to_string(),
        seed,
    };
    save_checkpoint(path, &meta, &state.model.to_named_tensors())?;
    Ok(())
}
