//! Semantic specialization of word vector spaces.
//!
//! The crate covers the numerical side of a two-stage specialization
//! procedure:
//!
//! 1. [`attract_repel`] fine-tunes the vectors of words that appear in
//!    synonym (attract) and antonym (repel) constraints with a margin-based
//!    mini-batch objective.
//! 2. [`postspec`] learns a global mapping from original to specialized
//!    vectors with an L2 loss mixed with an adversarial loss (vanilla GAN,
//!    Wasserstein GAN with weight clipping, or Wasserstein GAN with gradient
//!    penalty), so that words never seen in a constraint are specialized too.
//!
//! [`eval`] scores a space against word-similarity benchmarks with Spearman's
//! rank correlation, and [`harness`] builds synthetic fixtures with planted
//! ground truth.
//!
//! The crate is `no_std` and only needs `alloc`. Reading and writing files
//! lives in the companion `lexspec` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod attract_repel;
pub mod constraints;
mod error;
pub mod eval;
pub mod harness;
pub mod math;
pub mod nn;
pub mod postspec;
pub mod space;

pub use error::{Error, Result};
pub use math::Matrix;
pub use space::{cosine, unit_normalize, SeenVocab, VectorSpace};
