use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{derive_seed, DataError, LabeledExample, SsdgSplit, UnlabeledExample};

/// One training minibatch: per-source labeled and unlabeled sub-batches
/// (16 + 16 per source by default).
#[derive(Debug, Clone)]
pub struct BatchBundle {
    /// labeled[s] holds exactly `batch_labeled` examples of source s
    pub labeled: Vec<Vec<LabeledExample>>,
    pub unlabeled: Vec<Vec<UnlabeledExample>>,
    /// indices (into each source's pools) actually drawn, for diagnostics
    pub labeled_indices: Vec<Vec<usize>>,
    pub unlabeled_indices: Vec<Vec<usize>>,
}

impl BatchBundle {
    pub fn all_labeled(&self) -> impl Iterator<Item = &LabeledExample> {
        self.labeled.iter().flatten()
    }

    pub fn all_unlabeled(&self) -> impl Iterator<Item = &UnlabeledExample> {
        self.unlabeled.iter().flatten()
    }
}

/// Epoch-reshuffled cursor over one pool.
struct PoolCursor {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl PoolCursor {
    fn new(len: usize, seed: u64) -> Self {
        let mut cursor = Self {
            order: (0..len).collect(),
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        cursor.reshuffle();
        cursor
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            if self.pos == self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// An infinite, seeded stream of [`BatchBundle`]s over a split. Owned by a
/// single consumer; the trainer decides how many bundles to pull.
pub struct BatchStream<'a> {
    split: &'a SsdgSplit,
    batch_labeled: usize,
    batch_unlabeled: usize,
    labeled_cursors: Vec<PoolCursor>,
    unlabeled_cursors: Vec<PoolCursor>,
}

/// Builds the per-source minibatch stream: each bundle samples
/// `batch_labeled` labeled and `batch_unlabeled` unlabeled examples from
/// every source, reshuffling each pool per pass.
pub fn batch_stream(
    split: &SsdgSplit,
    batch_labeled: usize,
    batch_unlabeled: usize,
    seed: u64,
) -> Result<BatchStream<'_>, DataError> {
    if batch_labeled == 0 || batch_unlabeled == 0 {
        return Err(DataError::Stream("batch sizes must be >= 1".into()));
    }
    if split.sources.is_empty() {
        return Err(DataError::Stream("split has no sources".into()));
    }
    for source in &split.sources {
        if source.labeled.is_empty() {
            return Err(DataError::Stream(format!(
                "source domain {} has an empty labeled pool",
                source.domain
            )));
        }
        if source.unlabeled.is_empty() {
            return Err(DataError::Stream(format!(
                "source domain {} has an empty unlabeled pool",
                source.domain
            )));
        }
    }
    const STREAM_TAG: u64 = 0x5354524541;
    let labeled_cursors = split
        .sources
        .iter()
        .enumerate()
        .map(|(s, src)| PoolCursor::new(src.labeled.len(), derive_seed(seed, &[STREAM_TAG, s as u64, 0])))
        .collect();
    let unlabeled_cursors = split
        .sources
        .iter()
        .enumerate()
        .map(|(s, src)| {
            PoolCursor::new(src.unlabeled.len(), derive_seed(seed, &[STREAM_TAG, s as u64, 1]))
        })
        .collect();
    Ok(BatchStream {
        split,
        batch_labeled,
        batch_unlabeled,
        labeled_cursors,
        unlabeled_cursors,
    })
}

impl Iterator for BatchStream<'_> {
    type Item = BatchBundle;

    fn next(&mut self) -> Option<BatchBundle> {
        let mut labeled = Vec::with_capacity(self.split.sources.len());
        let mut unlabeled = Vec::with_capacity(self.split.sources.len());
        let mut labeled_indices = Vec::with_capacity(self.split.sources.len());
        let mut unlabeled_indices = Vec::with_capacity(self.split.sources.len());
        for (s, source) in self.split.sources.iter().enumerate() {
            let li = self.labeled_cursors[s].take(self.batch_labeled);
            let ui = self.unlabeled_cursors[s].take(self.batch_unlabeled);
            labeled.push(li.iter().map(|&i| source.labeled[i].clone()).collect());
            unlabeled.push(ui.iter().map(|&i| source.unlabeled[i].clone()).collect());
            labeled_indices.push(li);
            unlabeled_indices.push(ui);
        }
        Some(BatchBundle {
            labeled,
            unlabeled,
            labeled_indices,
            unlabeled_indices,
        })
    }
}
