//! Sparse recovery with prefix-tree identification matrices.
//!
//! The central object is [`design::IdentificationDesign`]: a stack of hash-defined
//! 0/1 test matrices, one per prefix length, decoded by walking the binary prefix
//! tree. Around it sit the classical designs used to filter its output
//! ([`combinatorial`]), the composed group-testing schemes ([`pipelines`]), the
//! noise-tolerant variants ([`noise_tolerant`]), a strict-turnstile heavy-hitters
//! sketch ([`heavy_hitters`]) and an ℓ2 weak identification system ([`l2_weak`]).

pub mod combinatorial;
pub mod design;
pub mod error;
pub mod hashing;
pub mod heavy_hitters;
pub mod l2_weak;
pub mod noise;
pub mod noise_tolerant;
pub mod pipelines;
pub mod rng;
pub mod util;

pub use error::{Error, Result};
