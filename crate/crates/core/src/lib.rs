//! Tag mining and recommendation for painting collections.
//!
//! The pipeline turns free-text artwork descriptions into candidate tags by
//! frequent itemset mining, trains autoencoder-based multi-label classifiers
//! to recommend tags for images, and refines the tag space in two ways:
//! clustering tags by their prediction vectors into meta-tags, and filtering
//! individual tags by their frequency/cross-validation-loss profile.
//!
//! Modules follow the pipeline stages:
//!
//! * [`corpus`] — manifests, sentence/token processing, PPM images and the
//!   deterministic synthetic corpus generator used for desk-scale validation.
//! * [`mining`] — FP-growth frequent itemset mining, support/lift statistics
//!   and the candidate tag vocabulary.
//! * [`tagging`] — ground-truth tag assignment, splits, micro metrics and the
//!   frequency-matched random baseline.
//! * [`tensor`] — a minimal deterministic tensor/backprop engine (conv, dense,
//!   activations, losses, Adam, finite-difference gradient checking).
//! * [`models`] — the autoencoder and classifier architectures, training
//!   loops and non-neural baselines.
//! * [`metatag`] — K-means clustering of tag prediction vectors, silhouettes
//!   and the tag-space reduction sweep.
//! * [`tagfilter`] — one-to-one tag suitability analysis and performant-tag
//!   selection.
//! * [`explain`] — integrated-gradients saliency maps.

pub mod corpus;
pub mod error;
pub mod explain;
pub mod metatag;
pub mod mining;
pub mod models;
pub mod tagfilter;
pub mod tagging;
pub mod tensor;

pub use error::{Error, Result};

/// Derives an independent stream seed from a base seed and a stream index.
///
/// All randomness in the crate flows from explicit seeds; stages that need
/// several independent streams (weight init, shuffles, restarts, trials)
/// split one configured seed with this function instead of consuming a
/// shared RNG in an order-dependent way.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // SplitMix64 finalizer; decorrelates consecutive stream indices.
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
