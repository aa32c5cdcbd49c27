//! Body-modality analysis of pose-keypoint time series.
//!
//! The crate covers the whole path from raw per-frame keypoints to a binary
//! distress prediction:
//!
//! * [`ingest`] gap-fills, smooths and scale-normalizes pose sequences and
//!   aligns sidecar feature tracks to video frames.
//! * [`gestures`] computes the 20-value statistical body-gesture descriptor.
//! * [`adaptors`] detects self-adaptor location events from limb boxes.
//! * [`motion`] slices trajectories under location events and classifies
//!   each slice as DYNAMIC or STATIC from band spectra.
//! * [`fidgets`] composes locations and actions into fidget activations.
//! * [`fusion`] holds the multi-input denoising auto-encoder, GMM and
//!   improved Fisher Vector encoding, forest feature selection and the
//!   LR/MLP classifiers under participant-independent cross-validation.
//! * [`analysis`] provides the linear threshold analysis, polarity report,
//!   feature search and Krippendorff's alpha.
//! * [`synth`] generates deterministic synthetic sessions with ground truth.
//!
//! The crate is `no_std` and only needs an allocator. File formats, model
//! persistence and the command line live in the `bodycue` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adaptors;
pub mod analysis;
pub mod error;
pub mod fidgets;
pub mod folds;
pub mod forest;
pub mod fusion;
pub mod gestures;
pub mod ingest;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
