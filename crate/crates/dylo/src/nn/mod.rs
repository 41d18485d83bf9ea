//! Detector architecture: configuration, building blocks, the network, and
//! output decoding.

pub mod blocks;
pub mod config;
pub mod decode;
pub mod init;
pub mod model;

pub use config::{ModelConfig, Ratio, STRIDES};
pub use decode::{decode, decode_cell, encode_cell, OFFSET_EPS, SIZE_LOGIT_BOUND};
pub use model::{Detector, PredGrid};
