use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ssdg_augment::AugmentationPolicy;
use ssdg_data::{load_folder_dataset_with_size, generate_synthetic, MultiDomainDataset, SynthConfig};
use ssdg_trainer::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Synthetic,
    Folder,
}

/// Where images come from: the procedural generator or a
/// `root/<domain>/<class>/<file>` folder tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    #[serde(default)]
    pub synth: SynthConfig,
    /// generator seed (synthetic only)
    #[serde(default)]
    pub seed: u64,
    /// dataset root (folder only)
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
}

fn default_image_size() -> usize {
    32
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Synthetic,
            synth: SynthConfig::default(),
            seed: 0,
            path: None,
            image_size: default_image_size(),
        }
    }
}

impl DatasetConfig {
    pub fn load(&self) -> Result<MultiDomainDataset, CliError> {
        match self.kind {
            DatasetKind::Synthetic => Ok(generate_synthetic(&self.synth, self.seed)?),
            DatasetKind::Folder => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::Config("dataset.path required for kind = \"folder\"".into()))?;
                Ok(load_folder_dataset_with_size(path, self.image_size)?)
            }
        }
    }
}

/// The leave-one-domain-out evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub labels_per_class: usize,
    pub seeds: Vec<u64>,
    /// empty = every domain takes a turn as the target
    pub targets: Vec<String>,
    /// None = all non-target domains; Some(k) averages over every
    /// k-subset of the non-target domains
    pub num_sources: Option<usize>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            labels_per_class: 10,
            seeds: vec![0, 1, 2, 3, 4],
            targets: Vec::new(),
            num_sources: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub run_root: PathBuf,
    /// save an intermediate checkpoint every this many steps (0 = final only)
    pub checkpoint_interval: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            run_root: PathBuf::from("runs"),
            checkpoint_interval: 0,
        }
    }
}

/// The whole experiment file. Unknown keys anywhere are hard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub protocol: ProtocolConfig,
    pub method: TrainConfig,
    pub augment: AugmentationPolicy,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.protocol.seeds.is_empty() {
            return Err(CliError::Config("protocol.seeds must be nonempty".into()));
        }
        if self.protocol.labels_per_class == 0 {
            return Err(CliError::Config("protocol.labels_per_class must be >= 1".into()));
        }
        self.method.validate()?;
        self.augment.validate()?;
        Ok(())
    }

    /// Run root, honoring the `SSDG_RUN_ROOT` environment override.
    pub fn run_root(&self) -> PathBuf {
        match std::env::var_os("SSDG_RUN_ROOT") {
            Some(root) if !root.is_empty() => PathBuf::from(root),
            _ => self.output.run_root.clone(),
        }
    }

    /// Hash over every training-affecting field (dataset, protocol,
    /// method with the per-cell seed zeroed, augmentation policy). The
    /// output section does not participate.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.method.seed = 0;
        canonical.output = OutputConfig::default();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..12].to_string()
    }

    /// Resolves protocol target names against the dataset's domain list.
    pub fn resolve_targets(&self, dataset: &MultiDomainDataset) -> Result<Vec<usize>, CliError> {
        if self.protocol.targets.is_empty() {
            return Ok((0..dataset.domains.len()).collect());
        }
        self.protocol
            .targets
            .iter()
            .map(|name| {
                dataset
                    .domains
                    .iter()
                    .position(|d| d == name)
                    .ok_or_else(|| {
                        CliError::Config(format!(
                            "protocol.targets: unknown domain '{name}' (have {:?})",
                            dataset.domains
                        ))
                    })
            })
            .collect()
    }
}

/// Loads a TOML config, applies `--set section.field=value` overrides on
/// the raw document, then deserializes fail-closed.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut value: toml::Value = toml::from_str(text)
        .map_err(|e| CliError::Config(format!("TOML parse error: {e}")))?;
    for entry in overrides {
        apply_override(&mut value, entry)?;
    }
    let config: ExperimentConfig = value
        .try_into()
        .map_err(|e| CliError::Config(format!("config error: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// `key.path=value` where the value is parsed as a TOML literal (falling
/// back to a string when it is not one).
fn apply_override(root: &mut toml::Value, entry: &str) -> Result<(), CliError> {
    let (path, raw) = entry
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{entry}' is not key=value")))?;
    let parsed: toml::Value = match toml::from_str::<toml::Value>(&format!("v = {raw}")) {
        Ok(toml::Value::Table(t)) => t.get("v").cloned().unwrap(),
        _ => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!("override path '{path}' is malformed")));
    }
    for segment in &segments[..segments.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override path '{path}' crosses a non-table")))?
            .entry(segment.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| CliError::Config(format!("override path '{path}' crosses a non-table")))?
        .insert(segments.last().unwrap().to_string(), parsed);
    Ok(())
}
