//! Pseudo semantic segmentation labels (PSSL) built from classifier explanations.
//!
//! The pipeline runs in four stages, each a module of this crate:
//!
//! 1. [`explain`] computes per-model SmoothGrad saliency for an image using the
//!    small differentiable networks in [`toynets`].
//! 2. [`consensus`] averages the min-max normalized maps of several models.
//! 3. [`psslgen`] ranks the averaged scores into deciles, packs them into
//!    4-bit records and builds whole datasets in parallel.
//! 4. [`trainkit`] pre-trains a segmenter on the top decile with a
//!    background-weighted cross-entropy and fine-tunes it on real labels;
//!    [`evalkit`] scores the result.
//!
//! [`imagery`] supplies image I/O and the synthetic blob benchmark used by every
//! experiment, and [`cli`] wires the stages into the `pssl` command.

pub mod cli;
pub mod consensus;
pub mod error;
pub mod evalkit;
pub mod explain;
pub mod imagery;
pub mod psslgen;
pub mod toynets;
pub mod trainkit;

pub use error::{Error, Result};
