//! Detection and rectification of sparse-pixel (L0) adversarial images.
//!
//! An L0 attack flips a classifier's prediction by corrupting a small number
//! of pixels, which in practice forces large-amplitude changes to the pixels
//! it does touch. This crate implements the full defense pipeline built
//! around that weakness:
//!
//! - [`nn`]: a small deterministic neural-network engine (manual
//!   backpropagation) for the target classifiers and the detector subnet.
//! - [`image`]: pixel containers, dataset ingestion (IDX / CIFAR binary),
//!   PNM export, and baseline transforms (bit-depth reduction, median
//!   filter, SVD compression).
//! - [`inpaint`]: the extreme-value mask + fast-marching inpainting
//!   pre-processor that reconstructs suspicious pixels.
//! - [`attack`]: saliency-guided (JSMA) and greedy L0 attacks, plus a
//!   defense-aware adaptive attack loop.
//! - [`detector`]: a Siamese comparison network trained with contrastive
//!   loss on (image, preprocessed-image) pairs.
//! - [`harness`]: dataset construction, metrics, and the experiment
//!   orchestration used by the CLI.

pub mod attack;
pub mod detector;
pub mod harness;
pub mod image;
pub mod inpaint;
pub mod nn;

#[cfg(any(test, feature = "testutil"))]
pub mod testutil;

/// 64-bit mixer used to derive independent RNG streams from one master seed.
///
/// splitmix64 finalizer; cheap, full-period, and good enough to decorrelate
/// per-sample dropout masks and per-image attack seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
