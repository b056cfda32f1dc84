use serde::{Deserialize, Serialize};

use crate::TrainerError;

/// Training method: the full approach, its ablation variants and the
/// baseline ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vanilla,
    Entmin,
    Meanteacher,
    Fixmatch,
    FixmatchSnn,
    Stylematch,
    StylematchStrongOnly,
    StylematchStyleOnly,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Vanilla,
        Method::Entmin,
        Method::Meanteacher,
        Method::Fixmatch,
        Method::FixmatchSnn,
        Method::Stylematch,
        Method::StylematchStrongOnly,
        Method::StylematchStyleOnly,
    ];

    /// Whether prototypes are sampled stochastically during training.
    pub fn uses_snn(self) -> bool {
        matches!(
            self,
            Method::FixmatchSnn
                | Method::Stylematch
                | Method::StylematchStrongOnly
                | Method::StylematchStyleOnly
        )
    }

    pub fn uses_strong_view(self) -> bool {
        matches!(
            self,
            Method::Fixmatch | Method::FixmatchSnn | Method::Stylematch | Method::StylematchStrongOnly
        )
    }

    pub fn uses_style_view(self) -> bool {
        matches!(self, Method::Stylematch | Method::StylematchStyleOnly)
    }

    /// Whether the method forwards weak views of the unlabeled stream.
    pub fn uses_unlabeled(self) -> bool {
        !matches!(self, Method::Vanilla)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Entmin => "entmin",
            Method::Meanteacher => "meanteacher",
            Method::Fixmatch => "fixmatch",
            Method::FixmatchSnn => "fixmatch_snn",
            Method::Stylematch => "stylematch",
            Method::StylematchStrongOnly => "stylematch_strong_only",
            Method::StylematchStyleOnly => "stylematch_style_only",
        }
    }

    pub fn parse(name: &str) -> Result<Method, TrainerError> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| TrainerError::InvalidConfig(format!("unknown method '{name}'")))
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub method: Method,
    pub steps: u64,
    pub lr_backbone: f32,
    pub lr_classifier: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub confidence_threshold: f32,
    pub temperature: f32,
    /// mean-teacher only
    pub ema_decay: f32,
    /// entropy-minimization only
    pub entmin_weight: f32,
    pub batch_labeled: usize,
    pub batch_unlabeled: usize,
    pub seed: u64,
    /// redraw the prototype noise for every view pass instead of sharing
    /// one draw per step
    pub resample_noise_per_view: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Stylematch,
            steps: 2000,
            lr_backbone: 0.003,
            lr_classifier: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            confidence_threshold: 0.95,
            temperature: 0.05,
            ema_decay: 0.999,
            entmin_weight: 1.0,
            batch_labeled: 16,
            batch_unlabeled: 16,
            seed: 0,
            resample_noise_per_view: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if !(self.confidence_threshold > 0.0 && self.confidence_threshold < 1.0) {
            return Err(TrainerError::InvalidConfig(
                "confidence_threshold must be in (0,1)".into(),
            ));
        }
        if self.lr_backbone <= 0.0 || self.lr_classifier <= 0.0 {
            return Err(TrainerError::InvalidConfig("learning rates must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(TrainerError::InvalidConfig("ema_decay must be in [0,1)".into()));
        }
        if self.temperature <= 0.0 {
            return Err(TrainerError::InvalidConfig("temperature must be > 0".into()));
        }
        if self.steps == 0 {
            return Err(TrainerError::InvalidConfig("steps must be >= 1".into()));
        }
        if self.batch_labeled == 0 || self.batch_unlabeled == 0 {
            return Err(TrainerError::InvalidConfig("batch sizes must be >= 1".into()));
        }
        Ok(())
    }
}
