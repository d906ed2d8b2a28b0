//! Hypersphere one-class losses for pixel-wise anomaly segmentation.
//!
//! The crate bundles everything that is pure computation: a small dense
//! tensor with hand-written adjoints, a toy fully-convolutional network,
//! synthetic normal/anomalous image generators with the training-time
//! augmentation chain, Gaussian heatmap upsampling, the pull/push loss
//! family, pixel-wise AUROC/AP and the paired rank statistics used to
//! compare loss variants across categories.
//!
//! It is `no_std` (with `alloc`) when the default `std` feature is turned
//! off. File formats, the experiment harness and the CLI live in the `fcdd`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod gradcheck;
pub mod heatmap;
pub mod losses;
pub mod math;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{ConvSpec, Tensor};
