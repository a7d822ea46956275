//! Omni-loss conditional GAN toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`loss`]: omni-loss, unified loss, multi-hinge, softmax cross-entropy,
//!   hinge GAN term and the per-pixel omni-loss, each with an exact gradient.
//! - [`labels`]: target vectors for every discriminator scheme.
//! - [`tensor`] and [`net`]: a small manually differentiated network library.
//! - [`inr`]: coordinate-based output head that renders at any resolution.
//! - [`optim`]: Adam with weight decay, finite-difference checker, truncated
//!   latent sampling.
//! - [`toydata`]: synthetic datasets and desk-scale quality metrics.
//! - [`trainer`]: the conditional GAN loop for all discriminator variants.
//! - [`inversion`]: latent (and optional parameter) fitting against
//!   discriminator features.
//! - [`io`]: PPM images, CSV helpers and checkpoint files.

pub mod error;
pub mod inr;
pub mod inversion;
pub mod io;
pub mod labels;
pub mod loss;
pub mod net;
pub mod optim;
pub mod tensor;
pub mod toydata;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;

/// Name of the pseudo-random generator used everywhere in the crate.
pub const PRNG_NAME: &str = "xoshiro256** (rand_xoshiro, seeded with seed_from_u64/SplitMix64)";

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The crate-wide random generator.
pub type Rng = rand_xoshiro::Xoshiro256StarStar;

/// Builds the crate-wide generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
