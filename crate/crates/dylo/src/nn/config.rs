//! Detector configuration.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Exact rational in (0, 1], serialized as a `"num/den"` string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: u32,
    pub den: u32,
}

impl Ratio {
    pub fn new(num: u32, den: u32) -> Self {
        Ratio { num, den }
    }

    /// Apply to a channel count; exact when `den` divides `c * num`.
    pub fn of(&self, c: usize) -> usize {
        c * self.num as usize / self.den as usize
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (num, den) = s
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("ratio must look like \"1/4\", got {s:?}")))?;
        let num: u32 = num
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad ratio numerator in {s:?}")))?;
        let den: u32 = den
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad ratio denominator in {s:?}")))?;
        if num == 0 || den == 0 || num > den {
            return Err(Error::Config(format!(
                "ratio must be in (0, 1] with positive terms, got {num}/{den}"
            )));
        }
        Ok(Ratio { num, den })
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Static description of the detector: every shape in the network follows
/// from these fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Square input edge in pixels; must be divisible by 32.
    pub input_size: usize,
    /// 1 for grayscale input, 3 for RGB.
    pub input_channels: usize,
    /// Base channel width of the backbone (doubles per downsampling stage).
    pub width: usize,
    /// Number of detection classes.
    pub num_classes: usize,
    /// Sub-map count of the cascaded-residual blocks.
    pub resc2net_n: usize,
    /// Fraction of channels convolved by partial convolutions.
    pub pconv_ratio: Ratio,
    /// Pool sizes of the pyramid-pooling tail (odd, stride 1, same pad).
    pub sppf_kernels: Vec<usize>,
    /// Weight initialization seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_size: 160,
            input_channels: 1,
            width: 16,
            num_classes: 9,
            resc2net_n: 4,
            pconv_ratio: Ratio::new(1, 4),
            sppf_kernels: vec![5, 9, 13],
            seed: 0,
        }
    }
}

/// Detection grid strides; one head per entry, shallow to deep.
pub const STRIDES: [usize; 3] = [8, 16, 32];

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 32 != 0 {
            return Err(Error::Config(format!(
                "input_size must be a positive multiple of 32, got {}",
                self.input_size
            )));
        }
        if self.input_channels != 1 && self.input_channels != 3 {
            return Err(Error::Config(format!(
                "input_channels must be 1 or 3, got {}",
                self.input_channels
            )));
        }
        if self.width == 0 {
            return Err(Error::Config("width must be positive".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        if self.resc2net_n < 2 {
            return Err(Error::Config(format!(
                "resc2net_n must be at least 2, got {}",
                self.resc2net_n
            )));
        }
        if self.width % self.resc2net_n != 0 {
            return Err(Error::Config(format!(
                "width {} must be divisible by resc2net_n {}",
                self.width, self.resc2net_n
            )));
        }
        if self.pconv_ratio.num == 0
            || self.pconv_ratio.den == 0
            || self.pconv_ratio.num > self.pconv_ratio.den
        {
            return Err(Error::Config(format!(
                "pconv_ratio must be in (0, 1], got {}",
                self.pconv_ratio
            )));
        }
        if self.width % self.pconv_ratio.den as usize != 0 {
            return Err(Error::Config(format!(
                "width {} must be divisible by the pconv_ratio denominator {}",
                self.width, self.pconv_ratio.den
            )));
        }
        if self.sppf_kernels.is_empty() {
            return Err(Error::Config("sppf_kernels must not be empty".into()));
        }
        for &k in &self.sppf_kernels {
            if k < 3 || k % 2 == 0 {
                return Err(Error::Config(format!(
                    "sppf kernels must be odd and >= 3, got {k}"
                )));
            }
        }
        // The deepest grid must hold at least one cell.
        if self.input_size < 32 {
            return Err(Error::Config(format!(
                "input_size {} leaves no cells at stride 32",
                self.input_size
            )));
        }
        Ok(())
    }

    /// Channels carried by each head output: 4 box terms + objectness +
    /// one score per class.
    pub fn head_channels(&self) -> usize {
        5 + self.num_classes
    }

    /// Grid edge length at each stride, shallow to deep.
    pub fn grid_sizes(&self) -> [usize; 3] {
        [
            self.input_size / STRIDES[0],
            self.input_size / STRIDES[1],
            self.input_size / STRIDES[2],
        ]
    }
}
