//! Seeded weight initialization.

use crate::tensor::{Scalar, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic parameter initializer. Weights draw from a Kaiming
/// uniform distribution computed in f64 (identical streams for f32 and f64
/// models with the same seed); biases start at zero.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Conv weight `[c_out, c_in, k, k]`: uniform in ±gain*sqrt(3/fan_in)
    /// with the leaky-ReLU (slope 0.1) gain and fan_in = c_in*k*k.
    pub fn kaiming_conv<T: Scalar>(&mut self, c_out: usize, c_in: usize, k: usize) -> Tensor<T> {
        let fan_in = (c_in * k * k) as f64;
        let gain = (2.0 / (1.0 + 0.1f64 * 0.1)).sqrt();
        let bound = gain * (3.0 / fan_in).sqrt();
        let data: Vec<T> = (0..c_out * c_in * k * k)
            .map(|_| T::from_f64(self.rng.gen_range(-bound..bound)))
            .collect();
        Tensor::param(data, &[c_out, c_in, k, k]).expect("init shape")
    }

    pub fn zero_bias<T: Scalar>(&mut self, c_out: usize) -> Tensor<T> {
        Tensor::param(vec![T::zero(); c_out], &[c_out]).expect("init shape")
    }
}
