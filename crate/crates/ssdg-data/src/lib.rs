//! Multi-domain image data for semi-supervised domain generalization.
//!
//! This crate provides a deterministic synthetic dataset generator whose
//! domains are style transforms of shared shape content, an ingestion path
//! for folder-structured datasets (`root/<domain>/<class>/<image>`), the
//! leave-one-domain-out split builder, and seeded per-domain minibatch
//! streams.

mod error;
mod folder;
mod split;
mod stream;
mod synth;
mod types;

pub use error::DataError;
pub use folder::{load_folder_dataset, load_folder_dataset_with_size};
pub use split::{
    build_split, build_split_with_sources, read_split_spec, split_from_spec, write_split_file,
    SourcePartition, SplitSpec,
    SsdgSplit,
};
pub use stream::{batch_stream, BatchBundle, BatchStream};
pub use synth::{generate_synthetic, per_domain_channel_means, SynthConfig};
pub use types::{ImageArray, LabeledExample, MultiDomainDataset, UnlabeledExample};

/// Mixes words into a child seed. Used everywhere a generator is derived
/// from (seed, index...) so that draws for one domain or sample never
/// perturb another's.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    // splitmix64 finalizer applied over the word sequence
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &w in words {
        h ^= w.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = h.rotate_left(27).wrapping_mul(0x94d0_49bb_1331_11eb);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}
