use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use ssdg_trainer::StepOutput;

use crate::{overconfidence_rate, pseudo_label_accuracy, MetricsError};

/// One line of the training metric log (newline-delimited JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: u64,
    pub labeled_loss: f32,
    pub strong_loss: f32,
    pub style_loss: f32,
    pub aux_loss: f32,
    pub total_loss: f32,
    /// absent for methods without pseudo-labels (or the restricted reading
    /// with an empty passing set)
    pub pseudo_label_accuracy: Option<f32>,
    pub overconfidence_rate: Option<f32>,
    pub learning_rate: f32,
    pub mean_sigma: f32,
}

impl MetricRecord {
    /// Builds the record for one step. Rates are computed over the
    /// unlabeled stream only by default (`unlabeled_only`); the
    /// `restrict_to_passing` flag switches pseudo-label accuracy to the
    /// threshold-passers-only reading.
    pub fn from_step(
        out: &StepOutput,
        threshold: f32,
        unlabeled_only: bool,
        restrict_to_passing: bool,
    ) -> Result<Self, MetricsError> {
        let diags: Vec<_> = out
            .pseudo_labels
            .iter()
            .filter(|d| !unlabeled_only || !d.from_labeled)
            .copied()
            .collect();
        let (pla, ocr) = if diags.is_empty() {
            (None, None)
        } else {
            (
                pseudo_label_accuracy(&diags, restrict_to_passing)?,
                Some(overconfidence_rate(&diags, threshold)?),
            )
        };
        let record = Self {
            step: out.step,
            labeled_loss: out.losses.labeled,
            strong_loss: out.losses.strong,
            style_loss: out.losses.style,
            aux_loss: out.losses.aux,
            total_loss: out.total,
            pseudo_label_accuracy: pla,
            overconfidence_rate: ocr,
            learning_rate: out.lr_backbone,
            mean_sigma: out.mean_sigma,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        for (name, rate) in [
            ("pseudo_label_accuracy", self.pseudo_label_accuracy),
            ("overconfidence_rate", self.overconfidence_rate),
        ] {
            if let Some(r) = rate {
                if !(0.0..=1.0).contains(&r) {
                    return Err(MetricsError::InvalidArgument(format!(
                        "{name} = {r} outside [0,1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Appends one record as a JSON line.
pub fn write_metric_record(out: &mut impl Write, record: &MetricRecord) -> Result<(), MetricsError> {
    let line = serde_json::to_string(record)
        .map_err(|e| MetricsError::InvalidArgument(e.to_string()))?;
    writeln!(out, "{line}")?;
    Ok(())
}

/// Parses a newline-delimited metric log, reporting the 1-based line
/// number of the first corrupt line.
pub fn read_metric_log(reader: impl BufRead) -> Result<Vec<MetricRecord>, MetricsError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetricRecord =
            serde_json::from_str(&line).map_err(|e| MetricsError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

/// One metric's trajectory: the raw points and a trailing moving average
/// over `window` steps (window 1 leaves the series unchanged).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub name: String,
    pub window: usize,
    pub raw: Vec<(u64, f32)>,
    pub smoothed: Vec<(u64, f32)>,
}

impl CurveSeries {
    /// Plot-ready text: a header declaring the smoothing window, then
    /// `step raw smoothed` rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("# metric {} window {}\n", self.name, self.window);
        for ((step, raw), (_, smoothed)) in self.raw.iter().zip(&self.smoothed) {
            out.push_str(&format!("{step} {raw} {smoothed}\n"));
        }
        out
    }
}

fn smooth(points: &[(u64, f32)], window: usize) -> Vec<(u64, f32)> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(step, _))| {
            let lo = (i + 1).saturating_sub(window);
            let slice = &points[lo..=i];
            let mean = slice.iter().map(|&(_, v)| v).sum::<f32>() / slice.len() as f32;
            (step, mean)
        })
        .collect()
}

/// Extracts every metric's (step, value) series from a parsed log, with a
/// trailing moving average of `window` steps next to the raw values.
pub fn curve_export(records: &[MetricRecord], window: usize) -> Result<Vec<CurveSeries>, MetricsError> {
    if window == 0 {
        return Err(MetricsError::InvalidArgument("window must be >= 1".into()));
    }
    let series = |name: &str, select: &dyn Fn(&MetricRecord) -> Option<f32>| {
        let raw: Vec<(u64, f32)> = records
            .iter()
            .filter_map(|r| select(r).map(|v| (r.step, v)))
            .collect();
        CurveSeries {
            name: name.into(),
            window,
            smoothed: smooth(&raw, window),
            raw,
        }
    };
    Ok(vec![
        series("labeled_loss", &|r| Some(r.labeled_loss)),
        series("strong_loss", &|r| Some(r.strong_loss)),
        series("style_loss", &|r| Some(r.style_loss)),
        series("aux_loss", &|r| Some(r.aux_loss)),
        series("total_loss", &|r| Some(r.total_loss)),
        series("pseudo_label_accuracy", &|r| r.pseudo_label_accuracy),
        series("overconfidence_rate", &|r| r.overconfidence_rate),
        series("learning_rate", &|r| Some(r.learning_rate)),
        series("mean_sigma", &|r| Some(r.mean_sigma)),
    ])
}
