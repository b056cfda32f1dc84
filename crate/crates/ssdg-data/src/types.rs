use ndarray::Array3;

use crate::DataError;

/// An H x W x C image with values in [0, 1]. 32x32x3 by default across the
/// workspace; the shape is fixed per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageArray {
    pixels: Array3<f32>,
}

impl ImageArray {
    /// Wraps a pixel array, rejecting values outside [0, 1] or non-finite
    /// entries.
    pub fn new(pixels: Array3<f32>) -> Result<Self, DataError> {
        for &v in pixels.iter() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(DataError::PixelRange(format!("value {v}")));
            }
        }
        Ok(Self { pixels })
    }

    /// Wraps a pixel array, clamping every value into [0, 1].
    pub fn new_clipped(mut pixels: Array3<f32>) -> Self {
        pixels.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Self { pixels }
    }

    pub fn pixels(&self) -> &Array3<f32> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array3<f32> {
        self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.pixels.shape()[2]
    }
}

/// A labeled source example (x, y) with its domain of origin.
#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub image: ImageArray,
    pub label: usize,
    pub domain: usize,
}

/// An unlabeled source example. The ground-truth label is retained for
/// diagnostics (pseudo-label accuracy curves) but is deliberately not a
/// public field: the trainer's loss path has no access to it.
#[derive(Debug, Clone)]
pub struct UnlabeledExample {
    pub image: ImageArray,
    pub domain: usize,
    hidden_label: usize,
}

impl UnlabeledExample {
    pub fn new(image: ImageArray, domain: usize, hidden_label: usize) -> Self {
        Self {
            image,
            domain,
            hidden_label,
        }
    }

    /// Ground-truth label for diagnostics only. Never feed this into a loss.
    pub fn diagnostic_label(&self) -> usize {
        self.hidden_label
    }
}

/// A dataset of K_total domains sharing one label set.
#[derive(Debug, Clone)]
pub struct MultiDomainDataset {
    pub domains: Vec<String>,
    /// examples[d] lists (image, label) pairs of domain d.
    pub examples: Vec<Vec<(ImageArray, usize)>>,
    pub num_classes: usize,
}

impl MultiDomainDataset {
    /// Checks the structural invariants: every domain holds at least one
    /// example of every class, and no label falls outside [0, C).
    pub fn validate(&self) -> Result<(), DataError> {
        if self.domains.len() != self.examples.len() {
            return Err(DataError::Ingestion(
                "domain name / example list length mismatch".into(),
            ));
        }
        for (d, examples) in self.examples.iter().enumerate() {
            let mut seen = vec![false; self.num_classes];
            for (_, label) in examples {
                if *label >= self.num_classes {
                    return Err(DataError::Ingestion(format!(
                        "domain {} ({}) has label {} >= num_classes {}",
                        d, self.domains[d], label, self.num_classes
                    )));
                }
                seen[*label] = true;
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(DataError::Ingestion(format!(
                    "domain {} ({}) lacks class {}",
                    d, self.domains[d], missing
                )));
            }
        }
        Ok(())
    }

    pub fn num_domains(&self) -> usize {
        self.domains.len()
    }
}
