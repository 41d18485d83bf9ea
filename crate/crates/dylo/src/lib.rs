//! dylo: a self-contained surface-defect detector for machined parts.
//!
//! Everything numeric is implemented in this crate from first principles on
//! flat `Vec` buffers: a reverse-mode autodiff tape, the convolutional
//! detection network, target assignment and losses, the optimizer and
//! training loop, dataset tooling (including a synthetic part/defect
//! generator), evaluation metrics, checkpointing, and a latency benchmark.
//!
//! Module map:
//! - [`tensor`]: tensors, the gradient tape, and differentiable operations
//! - [`nn`]: network building blocks, the detector, and box decoding
//! - [`boxes`]: axis-aligned boxes and IoU
//! - [`target`]: grid target assignment for training
//! - [`loss`]: localization / confidence / classification losses
//! - [`optim`]: Adam, learning-rate schedule, training loop, grid search
//! - [`data`]: annotations, manifests, splits, raster I/O, preprocessing,
//!   augmentation
//! - [`synth`]: synthetic part renderer and defect injectors
//! - [`eval`]: NMS, detection matching, PR/AP metrics, reports
//! - [`checkpoint`]: binary weight persistence
//! - [`bench`]: inference latency measurement
//! - [`cli`]: command-line entry points

pub mod bench;
pub mod boxes;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod nn;
pub mod optim;
pub mod synth;
pub mod target;
pub mod tensor;

pub use error::{Error, Result};
