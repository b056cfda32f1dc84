use ssdg_trainer::Method;

use crate::config::ExperimentConfig;
use crate::runner::{run_experiment, RunSummary};
use crate::CliError;

/// The three ablation studies: adding the classifier-stochasticity and
/// style-view components to the FixMatch base, comparing the augmentation
/// variants, and shrinking the number of source domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationPreset {
    Components,
    Augmentations,
    NumSources,
}

impl AblationPreset {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "components" => Ok(Self::Components),
            "augmentations" => Ok(Self::Augmentations),
            "num_sources" => Ok(Self::NumSources),
            other => Err(CliError::Config(format!(
                "unknown ablation preset '{other}' (have components, augmentations, num_sources)"
            ))),
        }
    }

    pub fn methods(self) -> Vec<Method> {
        match self {
            Self::Components => vec![Method::Fixmatch, Method::FixmatchSnn, Method::Stylematch],
            Self::Augmentations => vec![
                Method::StylematchStrongOnly,
                Method::StylematchStyleOnly,
                Method::Stylematch,
            ],
            Self::NumSources => vec![Method::Fixmatch, Method::Stylematch],
        }
    }
}

/// Runs one ablation preset. `components` and `augmentations` are a
/// single grid over their method sets; `num_sources` runs the grid once
/// per K in 1..=(domains-1), averaging K<max cells over every K-subset of
/// the non-target domains.
pub fn run_ablation_matrix(
    config: &ExperimentConfig,
    preset: AblationPreset,
) -> Result<Vec<(String, RunSummary)>, CliError> {
    match preset {
        AblationPreset::Components | AblationPreset::Augmentations => {
            let summary = run_experiment(config, &preset.methods())?;
            Ok(vec![(format!("{preset:?}").to_lowercase(), summary)])
        }
        AblationPreset::NumSources => {
            let dataset = config.dataset.load()?;
            let max_k = dataset.domains.len().saturating_sub(1);
            if max_k == 0 {
                return Err(CliError::Config(
                    "num_sources ablation needs at least 2 domains".into(),
                ));
            }
            if let Some(k) = config.protocol.num_sources {
                if k > max_k {
                    return Err(CliError::Config(format!(
                        "num_sources = {k} leaves no target with {} domains",
                        dataset.domains.len()
                    )));
                }
            }
            let mut summaries = Vec::new();
            for k in 1..=max_k {
                let mut variant = config.clone();
                variant.protocol.num_sources = Some(k);
                let summary = run_experiment(&variant, &preset.methods())?;
                summaries.push((format!("k={k}"), summary));
            }
            Ok(summaries)
        }
    }
}
