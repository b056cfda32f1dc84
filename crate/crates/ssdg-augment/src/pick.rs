use rand::Rng;
use serde::{Deserialize, Serialize};
use ssdg_data::{ImageArray, SsdgSplit};

use crate::AugmentError;

/// Where style partners come from: a different source domain (the default)
/// or random instances of the query's own domain (the single-source case).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StyleMode {
    #[default]
    CrossDomain,
    WithinDomain,
}

/// A chosen style partner. `pool_index` indexes the source's combined
/// labeled-then-unlabeled pool.
#[derive(Debug, Clone)]
pub struct StylePick {
    pub source_position: usize,
    pub domain: usize,
    pub pool_index: usize,
    pub image: ImageArray,
    /// mode actually used (cross-domain falls back when there is one source)
    pub mode_used: StyleMode,
}

fn pool_len(split: &SsdgSplit, source_position: usize) -> usize {
    let s = &split.sources[source_position];
    s.labeled.len() + s.unlabeled.len()
}

fn pool_image(split: &SsdgSplit, source_position: usize, index: usize) -> ImageArray {
    let s = &split.sources[source_position];
    if index < s.labeled.len() {
        s.labeled[index].image.clone()
    } else {
        s.unlabeled[index - s.labeled.len()].image.clone()
    }
}

/// Picks a style partner for an image of source `query_position` (position
/// in `split.sources`) at `query_index` in that source's pool. Cross-domain
/// mode draws uniformly from a uniformly chosen other source; within-domain
/// mode draws a different instance of the same source. With a single source,
/// cross-domain requests fall back to within-domain and log a warning.
pub fn pick_style_source<R: Rng>(
    query_position: usize,
    query_index: usize,
    split: &SsdgSplit,
    mode: StyleMode,
    rng: &mut R,
) -> Result<StylePick, AugmentError> {
    if split.sources.is_empty() {
        return Err(AugmentError::EmptyStylePool);
    }
    let k = split.sources.len();
    let mode_used = if mode == StyleMode::CrossDomain && k == 1 {
        log::warn!("cross-domain style requested with a single source; falling back to within-domain");
        StyleMode::WithinDomain
    } else {
        mode
    };
    match mode_used {
        StyleMode::CrossDomain => {
            // uniform over other sources, then uniform over that pool
            let mut pos = rng.gen_range(0..k - 1);
            if pos >= query_position {
                pos += 1;
            }
            let len = pool_len(split, pos);
            if len == 0 {
                return Err(AugmentError::EmptyStylePool);
            }
            let index = rng.gen_range(0..len);
            Ok(StylePick {
                source_position: pos,
                domain: split.sources[pos].domain,
                pool_index: index,
                image: pool_image(split, pos, index),
                mode_used,
            })
        }
        StyleMode::WithinDomain => {
            let len = pool_len(split, query_position);
            if len == 0 {
                return Err(AugmentError::EmptyStylePool);
            }
            let index = if len == 1 {
                0
            } else {
                // uniform over the pool minus the query instance
                let mut index = rng.gen_range(0..len - 1);
                if index >= query_index {
                    index += 1;
                }
                index
            };
            Ok(StylePick {
                source_position: query_position,
                domain: split.sources[query_position].domain,
                pool_index: index,
                image: pool_image(split, query_position, index),
                mode_used,
            })
        }
    }
}
