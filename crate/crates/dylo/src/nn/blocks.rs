//! Network building blocks: plain convolutions, cascaded-residual
//! multi-scale blocks, partial convolutions, and pyramid pooling.

use super::init::Init;
use crate::error::Result;
use crate::tensor::{Scalar, Tape, Tensor};

const LEAKY_SLOPE: f64 = 0.1;

/// Convolution layer; optionally followed by a leaky ReLU (slope 0.1).
pub struct ConvLayer<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    pub act: bool,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(
        init: &mut Init,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        padding: usize,
        act: bool,
    ) -> Self {
        ConvLayer {
            weight: init.kaiming_conv::<T>(c_out, c_in, k),
            bias: init.zero_bias::<T>(c_out),
            stride,
            padding,
            act,
        }
    }

    pub fn forward(&self, tape: &mut Tape<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = tape.conv2d(x, &self.weight, &self.bias, self.stride, self.padding)?;
        if self.act {
            tape.leaky_relu(&y, T::from_f64(LEAKY_SLOPE))
        } else {
            Ok(y)
        }
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        out.push((format!("{prefix}.bias"), self.bias.clone()));
    }
}

/// Cascaded-residual block over `n` channel sub-maps.
///
/// The input passes a 1x1 convolution and splits into `n` equal groups
/// `s_1..s_n`. The first group passes through unchanged; each later group
/// adds a 3x3 convolution of itself plus the previous group's output:
///
/// ```text
/// u_1 = s_1
/// u_i = s_i + conv3x3_i(s_i + u_{i-1})      for i = 2..n
/// ```
///
/// The groups are concatenated, fused by a second 1x1 convolution, and the
/// block input is added back (channel count is preserved, so the residual
/// is always shape-compatible). With all weights and biases zero the block
/// reduces to the identity.
pub struct ResC2Block<T: Scalar> {
    pub conv_in: ConvLayer<T>,
    pub branches: Vec<ConvLayer<T>>,
    pub fuse: ConvLayer<T>,
    pub n: usize,
}

impl<T: Scalar> ResC2Block<T> {
    pub fn new(init: &mut Init, channels: usize, n: usize) -> Self {
        assert!(n >= 2 && channels % n == 0, "invalid sub-map split");
        let sub = channels / n;
        ResC2Block {
            conv_in: ConvLayer::new(init, channels, channels, 1, 1, 0, true),
            branches: (1..n)
                .map(|_| ConvLayer::new(init, sub, sub, 3, 1, 1, true))
                .collect(),
            fuse: ConvLayer::new(init, channels, channels, 1, 1, 0, true),
            n,
        }
    }

    pub fn forward(&self, tape: &mut Tape<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let pre = self.conv_in.forward(tape, x)?;
        let subs = tape.split_channels(&pre, self.n)?;
        let mut outs: Vec<Tensor<T>> = Vec::with_capacity(self.n);
        outs.push(subs[0].clone());
        for i in 1..self.n {
            let prev = outs[i - 1].clone();
            let mixed = tape.add(&subs[i], &prev)?;
            let conv = self.branches[i - 1].forward(tape, &mixed)?;
            outs.push(tape.add(&subs[i], &conv)?);
        }
        let refs: Vec<&Tensor<T>> = outs.iter().collect();
        let cat = tape.concat(&refs, 1)?;
        let fused = self.fuse.forward(tape, &cat)?;
        tape.add(x, &fused)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        self.conv_in.collect_params(&format!("{prefix}.conv_in"), out);
        for (i, b) in self.branches.iter().enumerate() {
            // Branch convs serve sub-maps 2..=n.
            b.collect_params(&format!("{prefix}.branch{}", i + 2), out);
        }
        self.fuse.collect_params(&format!("{prefix}.fuse"), out);
    }
}

/// Partial convolution: a 3x3 convolution over the leading fraction of
/// channels while the remainder passes through untouched. Weight count is
/// ratio^2 of a full convolution over the same width.
pub struct PConv<T: Scalar> {
    pub conv: ConvLayer<T>,
    pub c_conv: usize,
}

impl<T: Scalar> PConv<T> {
    pub fn new(init: &mut Init, channels: usize, c_conv: usize) -> Self {
        assert!(c_conv >= 1 && c_conv <= channels, "invalid partial width");
        PConv {
            conv: ConvLayer::new(init, c_conv, c_conv, 3, 1, 1, false),
            c_conv,
        }
    }

    pub fn forward(&self, tape: &mut Tape<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let c = x.shape()[1];
        if self.c_conv == c {
            return self.conv.forward(tape, x);
        }
        let head = tape.slice_channels(x, 0, self.c_conv)?;
        let tail = tape.slice_channels(x, self.c_conv, c - self.c_conv)?;
        let conv = self.conv.forward(tape, &head)?;
        tape.concat(&[&conv, &tail], 1)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        self.conv.collect_params(&format!("{prefix}.conv"), out);
    }
}

/// Pyramid pooling tail: the input concatenated with one stride-1
/// same-size max pool per kernel, then a 1x1 projection back to the input
/// width.
pub struct Sppf<T: Scalar> {
    pub kernels: Vec<usize>,
    pub proj: ConvLayer<T>,
}

impl<T: Scalar> Sppf<T> {
    pub fn new(init: &mut Init, channels: usize, kernels: &[usize]) -> Self {
        Sppf {
            kernels: kernels.to_vec(),
            proj: ConvLayer::new(init, channels * (1 + kernels.len()), channels, 1, 1, 0, true),
        }
    }

    /// Channel count entering the projection.
    pub fn pre_projection_channels(&self, channels: usize) -> usize {
        channels * (1 + self.kernels.len())
    }

    pub fn forward(&self, tape: &mut Tape<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut branches: Vec<Tensor<T>> = vec![x.clone()];
        for &k in &self.kernels {
            branches.push(tape.maxpool2d(x, k, 1, (k - 1) / 2)?);
        }
        let refs: Vec<&Tensor<T>> = branches.iter().collect();
        let cat = tape.concat(&refs, 1)?;
        self.proj.forward(tape, &cat)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        self.proj.collect_params(&format!("{prefix}.proj"), out);
    }
}
