//! Small CNN ensembles for two-class chest X-ray classification, with
//! gradient-saliency heatmaps and per-pixel uncertainty maps.
//!
//! The pipeline, end to end:
//!
//! 1. **imaging** — grayscale extraction (channel 0), bilinear resize to
//!    150x150, per-image mean normalization, and stochastic affine
//!    augmentation (shear, zoom, rotation, shifts, horizontal flip).
//! 2. **data** — manifest loading, stratified 70/30 construction/test
//!    divisions with 80/20 train/validation splits (5 of each, 25 models
//!    total), and seeded augmented batch streams.
//! 3. **nn** — a from-scratch network engine: conv/pool/dense layers,
//!    ReLU and softmax, inverted dropout, cross-entropy with L2 on the
//!    hidden FC kernel, Adam, and exact backpropagation.
//! 4. **training** — the six benchmark architectures (3-4 conv blocks of 32
//!    3x3 kernels; FC width 64/128/256), early stopping on validation loss,
//!    and binary checkpoints.
//! 5. **ensemble** — five members per division, mean-probability prediction,
//!    and the experiment report (per-member and ensemble AUC/TPR with
//!    mean +/- std rows).
//! 6. **metrics** — ROC curves, trapezoidal AUC, TPR at the 0.5 threshold.
//! 7. **xai** — per-neuron gradient saliency with a linear output head,
//!    ensemble mean heatmaps, per-pixel standard-deviation uncertainty maps,
//!    and jet-colormapped 50% overlays.
//!
//! Every stochastic step is seeded and replayable; parallel execution never
//! changes any reported number. See the `examples/` directory for one
//! runnable example per capability, and the `cxr` binary for the CLI.

pub mod cli;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod training;
pub mod xai;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
