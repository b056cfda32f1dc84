use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::MetricsError;

/// One benchmark cell: the target-domain top-1 accuracy of a trained run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub target: String,
    pub seed: u64,
    /// fraction in [0, 1]
    pub accuracy: f32,
}

/// Benchmark results arranged method x target, averaged over seeds, with a
/// cross-domain average per method.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub methods: Vec<String>,
    pub targets: Vec<String>,
    pub seeds: Vec<u64>,
    pub rows: Vec<RunResult>,
    /// domain_means[m][t] = mean accuracy of method m on target t over seeds
    pub domain_means: Vec<Vec<f32>>,
    /// overall[m] = mean of domain_means[m]
    pub overall: Vec<f32>,
}

/// Builds the table from a flat list of results. Methods, targets and
/// seeds are discovered from the rows; every (method, target, seed) cell
/// of that grid must be present exactly once.
pub fn aggregate(rows: &[RunResult]) -> Result<ResultsTable, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::MissingCell("empty result set".into()));
    }
    let methods: Vec<String> = {
        // preserve first-appearance order for methods (table row order)
        let mut seen = BTreeSet::new();
        rows.iter()
            .filter(|r| seen.insert(r.method.clone()))
            .map(|r| r.method.clone())
            .collect()
    };
    let targets: Vec<String> = rows
        .iter()
        .map(|r| r.target.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let seeds: Vec<u64> = rows
        .iter()
        .map(|r| r.seed)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut domain_means = Vec::with_capacity(methods.len());
    let mut overall = Vec::with_capacity(methods.len());
    for method in &methods {
        let mut means = Vec::with_capacity(targets.len());
        for target in &targets {
            let mut sum = 0.0f64;
            for &seed in &seeds {
                let cell: Vec<&RunResult> = rows
                    .iter()
                    .filter(|r| &r.method == method && &r.target == target && r.seed == seed)
                    .collect();
                match cell.len() {
                    1 => sum += cell[0].accuracy as f64,
                    0 => {
                        return Err(MetricsError::MissingCell(format!(
                            "method={method} target={target} seed={seed}"
                        )))
                    }
                    n => {
                        return Err(MetricsError::InvalidArgument(format!(
                            "method={method} target={target} seed={seed} appears {n} times"
                        )))
                    }
                }
            }
            means.push((sum / seeds.len() as f64) as f32);
        }
        overall.push(means.iter().sum::<f32>() / means.len() as f32);
        domain_means.push(means);
    }
    Ok(ResultsTable {
        methods,
        targets,
        seeds,
        rows: rows.to_vec(),
        domain_means,
        overall,
    })
}

impl ResultsTable {
    /// Machine-readable rows: `method,target,seed,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,target,seed,accuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6}\n",
                r.method, r.target, r.seed, r.accuracy
            ));
        }
        out
    }

    /// Aligned-text summary: one row per method, one column per target
    /// plus the cross-domain average, accuracies in percent.
    pub fn to_aligned_text(&self) -> String {
        let name_width = self
            .methods
            .iter()
            .map(|m| m.len())
            .max()
            .unwrap_or(6)
            .max(6);
        let col_width = self.targets.iter().map(|t| t.len()).max().unwrap_or(7).max(7);
        let mut out = format!("{:<name_width$}", "method");
        for t in &self.targets {
            out.push_str(&format!("  {t:>col_width$}"));
        }
        out.push_str(&format!("  {:>col_width$}\n", "avg"));
        for (m, method) in self.methods.iter().enumerate() {
            out.push_str(&format!("{method:<name_width$}"));
            for &v in &self.domain_means[m] {
                out.push_str(&format!("  {:>col_width$.2}", v * 100.0));
            }
            out.push_str(&format!("  {:>col_width$.2}\n", self.overall[m] * 100.0));
        }
        out
    }

    pub fn mean_accuracy(&self, method: &str) -> Option<f32> {
        self.methods
            .iter()
            .position(|m| m == method)
            .map(|i| self.overall[i])
    }
}
