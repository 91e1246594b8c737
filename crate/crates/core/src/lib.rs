//! Pool-based active learning for multi-label text classification.
//!
//! The crate covers the full experiment pipeline: corpus loading and
//! cleaning, TF-IDF vectorization, kmeans++ clustering, three classifiers
//! (logistic regression, random forest, feed-forward network), acquisition
//! strategies (random, uncertainty, cluster-based and hybrids), and the
//! iterate/train/select experiment engine with micro-averaged metrics.

pub mod acquisition;
pub mod clustering;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod features;
pub mod metrics;
pub mod models;
pub mod synthgen;

pub use error::{Error, Result};

/// Document identifier as it appears in a corpus file.
pub type DocId = u64;

/// Dense binary label vector over a [`corpus::LabelSpace`].
pub type LabelVec = Vec<u8>;

/// Derives an independent sub-seed from a base seed and a tag (splitmix64
/// finalizer). Used to give each randomized stage of an experiment its own
/// stream while keeping the whole run reproducible from one seed.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
