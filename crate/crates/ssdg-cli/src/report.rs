use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use ssdg_data::build_split;
use ssdg_metrics::{aggregate, curve_export, read_metric_log, ResultsTable, RunResult};

use crate::CliError;

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::runner::atomic_write;

/// Outcome of report generation over a (possibly partial) run directory.
#[derive(Debug)]
pub struct ReportStatus {
    pub root: PathBuf,
    pub complete: bool,
    /// cells of the expected grid without a result row
    pub missing: Vec<String>,
    pub table: Option<ResultsTable>,
}

/// Collects result rows under the config's hash directory, renders the
/// summary table and per-cell curve files, and reports missing cells.
pub fn emit_report(config: &ExperimentConfig) -> Result<ReportStatus, CliError> {
    let root = config.run_root().join(config.config_hash());
    if !root.is_dir() {
        return Err(CliError::Report(format!(
            "{}: no run directory (nothing to report)",
            root.display()
        )));
    }
    let dataset = config.dataset.load()?;
    let targets: Vec<String> = config
        .resolve_targets(&dataset)?
        .into_iter()
        .map(|t| dataset.domains[t].clone())
        .collect();
    let methods = method_dirs(&root)?;
    if methods.is_empty() {
        return Err(CliError::Report(format!(
            "{}: run directory holds no method results",
            root.display()
        )));
    }

    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for method in &methods {
        for target in &targets {
            for &seed in &config.protocol.seeds {
                let cell_dir = root.join(method).join(target).join(format!("seed{seed}"));
                let result_path = cell_dir.join("result.row");
                if !result_path.exists() {
                    missing.push(format!("{method}/{target}/seed{seed}"));
                    continue;
                }
                let row: RunResult = serde_json::from_str(&fs::read_to_string(&result_path)?)
                    .map_err(|e| CliError::Report(format!("{}: {e}", result_path.display())))?;
                rows.push(row);
                write_cell_curves(&cell_dir)?;
            }
        }
    }

    let complete = missing.is_empty() && !rows.is_empty();
    let table = if complete {
        let table = aggregate(&rows)?;
        atomic_write(&root.join("results.csv"), table.to_csv().as_bytes())?;
        atomic_write(&root.join("results.txt"), table.to_aligned_text().as_bytes())?;
        Some(table)
    } else {
        None
    };
    let manifest = serde_json::json!({
        "config_hash": config.config_hash(),
        "config_snapshot": "config.toml",
        "seeds": config.protocol.seeds,
        "methods": methods,
        "targets": targets,
        "missing_cells": missing,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    atomic_write(
        &root.join("report_manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Report(e.to_string()))?
            .as_bytes(),
    )?;
    Ok(ReportStatus {
        root,
        complete,
        missing,
        table,
    })
}

const CURVE_SMOOTHING_WINDOW: usize = 20;

fn write_cell_curves(cell_dir: &Path) -> Result<(), CliError> {
    let mut logs: Vec<PathBuf> = fs::read_dir(cell_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n == "metrics.log" || (n.starts_with("metrics-") && n.ends_with(".log")))
        })
        .collect();
    logs.sort();
    for log_path in logs {
        let records = read_metric_log(BufReader::new(fs::File::open(&log_path)?)).map_err(
            |e| CliError::Report(format!("{}: {e}", log_path.display())),
        )?;
        let stem = log_path.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
        let curves_dir = cell_dir.join(format!("curves-{stem}"));
        fs::create_dir_all(&curves_dir)?;
        for curve in curve_export(&records, CURVE_SMOOTHING_WINDOW)? {
            atomic_write(
                &curves_dir.join(format!("{}.txt", curve.name)),
                curve.to_text().as_bytes(),
            )?;
        }
    }
    Ok(())
}

fn method_dirs(root: &Path) -> Result<Vec<String>, CliError> {
    let mut names: Vec<String> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    Ok(names)
}

/// Renders a dataset to a `root/<domain>/class<label>/<index>.png` tree
/// that the folder loader reads back.
pub fn generate_data(dataset: &DatasetConfig, out: &Path) -> Result<usize, CliError> {
    let ds = dataset.load()?;
    let mut written = 0usize;
    for (d, domain) in ds.domains.iter().enumerate() {
        for (i, (image, label)) in ds.examples[d].iter().enumerate() {
            let dir = out.join(domain).join(format!("class{label}"));
            fs::create_dir_all(&dir)?;
            let (h, w) = (image.height(), image.width());
            let mut img = image::RgbImage::new(w as u32, h as u32);
            for y in 0..h {
                for x in 0..w {
                    let px = |c: usize| (image.pixels()[[y, x, c]] * 255.0).round() as u8;
                    img.put_pixel(x as u32, y as u32, image::Rgb([px(0), px(1), px(2)]));
                }
            }
            img.save(dir.join(format!("{i:05}.png")))
                .map_err(|e| CliError::Report(format!("png write: {e}")))?;
            written += 1;
        }
    }
    Ok(written)
}

/// Human-readable description of one leave-one-domain-out split.
pub fn inspect_split(
    config: &ExperimentConfig,
    target_name: &str,
    seed: u64,
) -> Result<String, CliError> {
    let dataset = config.dataset.load()?;
    let target = dataset
        .domains
        .iter()
        .position(|d| d == target_name)
        .ok_or_else(|| {
            CliError::Config(format!(
                "unknown domain '{target_name}' (have {:?})",
                dataset.domains
            ))
        })?;
    let split = build_split(&dataset, target, config.protocol.labels_per_class, seed)?;
    let mut out = format!(
        "target {} | seed {} | labels_per_class {} | total labels {}\n",
        target_name,
        seed,
        config.protocol.labels_per_class,
        split.total_labeled()
    );
    for source in &split.sources {
        out.push_str(&format!(
            "source {:<12} labeled {:>5}  unlabeled {:>5}\n",
            dataset.domains[source.domain],
            source.labeled.len(),
            source.unlabeled.len()
        ));
    }
    out.push_str(&format!(
        "target pool (held out): {} examples\n",
        dataset.examples[target].len()
    ));
    Ok(out)
}
