use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{derive_seed, DataError, LabeledExample, MultiDomainDataset, UnlabeledExample};

/// One source domain's partition into labeled and unlabeled pools.
#[derive(Debug, Clone)]
pub struct SourcePartition {
    pub domain: usize,
    pub labeled: Vec<LabeledExample>,
    pub unlabeled: Vec<UnlabeledExample>,
    /// Indices into the dataset's per-domain example list that were drawn
    /// as labeled, sorted ascending. Sufficient to reconstruct the split.
    pub labeled_indices: Vec<usize>,
}

/// A leave-one-domain-out SSDG split: per-source labeled/unlabeled pools
/// plus the held-out target domain.
#[derive(Debug, Clone)]
pub struct SsdgSplit {
    pub target_domain: usize,
    pub sources: Vec<SourcePartition>,
    pub seed: u64,
    pub labels_per_class: usize,
}

impl SsdgSplit {
    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn total_labeled(&self) -> usize {
        self.sources.iter().map(|s| s.labeled.len()).sum()
    }
}

/// Builds a split: the target domain is held out entirely; every other
/// domain contributes exactly `labels_per_class` labeled examples per class,
/// drawn without replacement from a generator derived from (seed, domain),
/// with the remainder kept as unlabeled (ground truth hidden).
pub fn build_split(
    dataset: &MultiDomainDataset,
    target_domain: usize,
    labels_per_class: usize,
    seed: u64,
) -> Result<SsdgSplit, DataError> {
    build_split_with_sources(dataset, target_domain, None, labels_per_class, seed)
}

/// As [`build_split`] but restricted to an explicit source subset (for
/// varying the number of source domains). `sources = None` means all
/// non-target domains.
pub fn build_split_with_sources(
    dataset: &MultiDomainDataset,
    target_domain: usize,
    sources: Option<&[usize]>,
    labels_per_class: usize,
    seed: u64,
) -> Result<SsdgSplit, DataError> {
    if target_domain >= dataset.num_domains() {
        return Err(DataError::Split(format!(
            "target domain {target_domain} out of range (have {})",
            dataset.num_domains()
        )));
    }
    if labels_per_class == 0 {
        return Err(DataError::Split("labels_per_class must be >= 1".into()));
    }
    let source_domains: Vec<usize> = match sources {
        Some(list) => {
            if list.contains(&target_domain) {
                return Err(DataError::Split(format!(
                    "target domain {target_domain} listed as a source"
                )));
            }
            for &d in list {
                if d >= dataset.num_domains() {
                    return Err(DataError::Split(format!("source domain {d} out of range")));
                }
            }
            list.to_vec()
        }
        None => (0..dataset.num_domains())
            .filter(|&d| d != target_domain)
            .collect(),
    };
    if source_domains.is_empty() {
        return Err(DataError::Split("no source domains".into()));
    }

    let mut partitions = Vec::with_capacity(source_domains.len());
    for &d in &source_domains {
        let labeled_indices = draw_labeled_indices(dataset, d, labels_per_class, seed)?;
        partitions.push(build_partition(dataset, d, &labeled_indices));
    }

    Ok(SsdgSplit {
        target_domain,
        sources: partitions,
        seed,
        labels_per_class,
    })
}

fn draw_labeled_indices(
    dataset: &MultiDomainDataset,
    domain: usize,
    labels_per_class: usize,
    seed: u64,
) -> Result<Vec<usize>, DataError> {
    // per-class index pools within the domain
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    for (i, (_, label)) in dataset.examples[domain].iter().enumerate() {
        per_class[*label].push(i);
    }
    const SPLIT_TAG: u64 = 0x53504c4954; // distinguishes split draws from other seed uses
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[SPLIT_TAG, domain as u64]));
    let mut chosen = Vec::with_capacity(labels_per_class * dataset.num_classes);
    for (class, pool) in per_class.iter().enumerate() {
        if pool.len() < labels_per_class {
            return Err(DataError::Split(format!(
                "domain {domain} class {class}: {} examples < labels_per_class {labels_per_class}",
                pool.len()
            )));
        }
        let mut shuffled = pool.clone();
        shuffled.shuffle(&mut rng);
        chosen.extend_from_slice(&shuffled[..labels_per_class]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

fn build_partition(
    dataset: &MultiDomainDataset,
    domain: usize,
    labeled_indices: &[usize],
) -> SourcePartition {
    let mut is_labeled = vec![false; dataset.examples[domain].len()];
    for &i in labeled_indices {
        is_labeled[i] = true;
    }
    let mut labeled = Vec::with_capacity(labeled_indices.len());
    let mut unlabeled = Vec::new();
    for (i, (image, label)) in dataset.examples[domain].iter().enumerate() {
        if is_labeled[i] {
            labeled.push(LabeledExample {
                image: image.clone(),
                label: *label,
                domain,
            });
        } else {
            unlabeled.push(UnlabeledExample::new(image.clone(), domain, *label));
        }
    }
    SourcePartition {
        domain,
        labeled,
        unlabeled,
        labeled_indices: labeled_indices.to_vec(),
    }
}

/// The plain-text serializable description of a split: everything needed to
/// reconstruct it exactly against the same dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub target_domain: usize,
    pub seed: u64,
    pub labels_per_class: usize,
    /// (source domain, sorted labeled indices)
    pub sources: Vec<(usize, Vec<usize>)>,
}

impl SplitSpec {
    pub fn of(split: &SsdgSplit) -> Self {
        Self {
            target_domain: split.target_domain,
            seed: split.seed,
            labels_per_class: split.labels_per_class,
            sources: split
                .sources
                .iter()
                .map(|s| (s.domain, s.labeled_indices.clone()))
                .collect(),
        }
    }
}

/// Writes the split description as a plain-text structured file.
pub fn write_split_file(split: &SsdgSplit, path: &Path) -> Result<(), DataError> {
    let spec = SplitSpec::of(split);
    let mut out = String::new();
    out.push_str(&format!("target {}\n", spec.target_domain));
    out.push_str(&format!("seed {}\n", spec.seed));
    out.push_str(&format!("labels_per_class {}\n", spec.labels_per_class));
    for (domain, indices) in &spec.sources {
        out.push_str(&format!("source {domain} labeled"));
        for i in indices {
            out.push_str(&format!(" {i}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| DataError::Split(format!("{}: {e}", path.display())))
}

/// Parses a split file written by [`write_split_file`].
pub fn read_split_spec(path: &Path) -> Result<SplitSpec, DataError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| DataError::Split(format!("{}: {e}", path.display())))?;
    let mut target_domain = None;
    let mut seed = None;
    let mut labels_per_class = None;
    let mut sources = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut words = line.split_whitespace();
        let parse = |w: Option<&str>| -> Result<u64, DataError> {
            w.ok_or_else(|| DataError::Split(format!("line {}: missing value", lineno + 1)))?
                .parse()
                .map_err(|e| DataError::Split(format!("line {}: {e}", lineno + 1)))
        };
        match words.next() {
            Some("target") => target_domain = Some(parse(words.next())? as usize),
            Some("seed") => seed = Some(parse(words.next())?),
            Some("labels_per_class") => labels_per_class = Some(parse(words.next())? as usize),
            Some("source") => {
                let domain = parse(words.next())? as usize;
                match words.next() {
                    Some("labeled") => {}
                    _ => {
                        return Err(DataError::Split(format!(
                            "line {}: expected 'labeled'",
                            lineno + 1
                        )))
                    }
                }
                let indices: Result<Vec<usize>, _> =
                    words.map(|w| parse(Some(w)).map(|v| v as usize)).collect();
                sources.push((domain, indices?));
            }
            Some(other) => {
                return Err(DataError::Split(format!(
                    "line {}: unknown field '{other}'",
                    lineno + 1
                )))
            }
            None => {}
        }
    }
    Ok(SplitSpec {
        target_domain: target_domain
            .ok_or_else(|| DataError::Split("missing 'target' line".into()))?,
        seed: seed.ok_or_else(|| DataError::Split("missing 'seed' line".into()))?,
        labels_per_class: labels_per_class
            .ok_or_else(|| DataError::Split("missing 'labels_per_class' line".into()))?,
        sources,
    })
}

/// Reconstructs a split from a spec against the same dataset.
pub fn split_from_spec(
    dataset: &MultiDomainDataset,
    spec: &SplitSpec,
) -> Result<SsdgSplit, DataError> {
    let mut partitions = Vec::with_capacity(spec.sources.len());
    for (domain, indices) in &spec.sources {
        if *domain >= dataset.num_domains() {
            return Err(DataError::Split(format!("source domain {domain} out of range")));
        }
        let len = dataset.examples[*domain].len();
        if indices.iter().any(|&i| i >= len) {
            return Err(DataError::Split(format!(
                "labeled index out of range for domain {domain}"
            )));
        }
        partitions.push(build_partition(dataset, *domain, indices));
    }
    Ok(SsdgSplit {
        target_domain: spec.target_domain,
        sources: partitions,
        seed: spec.seed,
        labels_per_class: spec.labels_per_class,
    })
}
