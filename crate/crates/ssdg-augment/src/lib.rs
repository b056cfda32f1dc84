//! The three view-generating transforms used for consistency training:
//! weak (crop + flip), strong (RandAugment + Cutout) and style (pixel-level
//! adaptive instance normalization against a cross-domain partner).
//!
//! All transforms are pure functions of (input, rng state), preserve the
//! image shape and keep values in [0, 1].

mod pick;
mod strong;
mod style;
mod weak;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pick::{pick_style_source, StyleMode, StylePick};
pub use strong::{t_strong, StrongOp, STRONG_OPS};
pub use style::t_style;
pub use weak::t_weak;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("shape mismatch: content {content:?} vs style {style:?}")]
    ShapeMismatch {
        content: Vec<usize>,
        style: Vec<usize>,
    },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("empty style pool")]
    EmptyStylePool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WeakPolicy {
    pub crop_padding: usize,
    pub flip_prob: f32,
}

impl Default for WeakPolicy {
    fn default() -> Self {
        Self {
            crop_padding: 4,
            flip_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StrongPolicy {
    pub num_ops: usize,
    /// magnitude on the 0..=30 scale shared by all operations
    pub magnitude: u32,
    /// side length of the cutout square as a fraction of the image side
    pub cutout_fraction: f32,
}

impl Default for StrongPolicy {
    fn default() -> Self {
        Self {
            num_ops: 2,
            magnitude: 9,
            cutout_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StylePolicy {
    /// variance floor added to the content standard deviation
    pub epsilon: f32,
    pub mode: StyleMode,
}

impl Default for StylePolicy {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            mode: StyleMode::CrossDomain,
        }
    }
}

/// The full view-generation policy, part of the experiment config file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentationPolicy {
    pub weak: WeakPolicy,
    pub strong: StrongPolicy,
    pub style: StylePolicy,
}

impl AugmentationPolicy {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.weak.flip_prob) {
            return Err(AugmentError::InvalidPolicy("flip_prob must be in [0,1]".into()));
        }
        if !(self.strong.cutout_fraction > 0.0 && self.strong.cutout_fraction <= 1.0) {
            return Err(AugmentError::InvalidPolicy(
                "cutout_fraction must be in (0,1]".into(),
            ));
        }
        if self.strong.magnitude > 30 {
            return Err(AugmentError::InvalidPolicy("magnitude must be <= 30".into()));
        }
        if self.style.epsilon <= 0.0 {
            return Err(AugmentError::InvalidPolicy("epsilon must be > 0".into()));
        }
        Ok(())
    }
}
