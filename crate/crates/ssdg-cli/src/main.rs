use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssdg_cli::{
    emit_report, generate_data, inspect_split, load_config, run_ablation_matrix, run_experiment,
    AblationPreset, CliError,
};
use ssdg_trainer::Method;

#[derive(Parser)]
#[command(name = "ssdg", about = "Semi-supervised domain generalization lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the configured dataset to a domain/class folder tree
    GenerateData {
        #[arg(long)]
        config: PathBuf,
        /// override any config field, e.g. --set method.steps=500
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the benchmark grid for one or more methods
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
        /// comma-separated method list; defaults to the config's method
        #[arg(long)]
        methods: Option<String>,
    },
    /// Run a named ablation preset (components | augmentations | num_sources)
    Ablate {
        preset: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Summarize a run directory: tables, curves, manifest
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
    },
    /// Describe one leave-one-domain-out split
    InspectSplit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_methods(spec: Option<&str>, fallback: Method) -> Result<Vec<Method>, CliError> {
    match spec {
        None => Ok(vec![fallback]),
        Some(list) => list
            .split(',')
            .map(|name| Method::parse(name.trim()).map_err(CliError::from))
            .collect(),
    }
}

fn run() -> Result<ExitCode, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenerateData {
            config,
            overrides,
            out,
        } => {
            let config = load_config(&config, &overrides)?;
            let written = generate_data(&config.dataset, &out)?;
            println!("wrote {written} images under {}", out.display());
        }
        Command::Run {
            config,
            overrides,
            methods,
        } => {
            let config = load_config(&config, &overrides)?;
            let methods = parse_methods(methods.as_deref(), config.method.method)?;
            let summary = run_experiment(&config, &methods)?;
            println!(
                "run {} : {} rows ({} reused), {} failures",
                summary.hash,
                summary.rows.len(),
                summary.skipped,
                summary.failures.len()
            );
            for (cell, error) in &summary.failures {
                eprintln!("failed {cell}: {error}");
            }
            if let Some(table) = &summary.table {
                print!("{}", table.to_aligned_text());
            }
            if !summary.failures.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Ablate {
            preset,
            config,
            overrides,
        } => {
            let config = load_config(&config, &overrides)?;
            let preset = AblationPreset::parse(&preset)?;
            let mut failed = false;
            for (label, summary) in run_ablation_matrix(&config, preset)? {
                println!("[{label}] run {} : {} rows", summary.hash, summary.rows.len());
                for (cell, error) in &summary.failures {
                    failed = true;
                    eprintln!("failed {cell}: {error}");
                }
                if let Some(table) = &summary.table {
                    print!("{}", table.to_aligned_text());
                }
            }
            if failed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { config, overrides } => {
            let config = load_config(&config, &overrides)?;
            let status = emit_report(&config)?;
            if let Some(table) = &status.table {
                print!("{}", table.to_aligned_text());
            }
            if !status.complete {
                for cell in &status.missing {
                    eprintln!("missing {cell}");
                }
                return Ok(ExitCode::from(2));
            }
        }
        Command::InspectSplit {
            config,
            overrides,
            target,
            seed,
        } => {
            let config = load_config(&config, &overrides)?;
            print!("{}", inspect_split(&config, &target, seed)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::init();
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
