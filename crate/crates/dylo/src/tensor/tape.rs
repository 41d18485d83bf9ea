//! Gradient tape: operation recording and reverse-mode backpropagation.
//!
//! Each differentiable op validates shapes, computes its forward result,
//! and—when recording is active and any operand carries gradients—pushes a
//! node holding the operand handles plus whatever the backward rule needs
//! (pooling argmaxes, convolution geometry, gather indices). Nodes are
//! appended in execution order, so the list is already topologically sorted
//! and a single reverse sweep propagates gradients with every node visited
//! exactly once.

use super::kernels::{self, ConvDims};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

static TAPE_COUNTER: AtomicU64 = AtomicU64::new(1);

/// Elementwise operation selector for the generic entry point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElemKind {
    Add,
    Sub,
    Mul,
    LeakyRelu,
    Sigmoid,
    Bce,
}

enum Rule<T: Scalar> {
    Conv2d(ConvDims),
    MaxPool2d { argmax: Vec<usize> },
    UpsampleNearest { factor: usize },
    Concat,
    SliceChannels { start: usize },
    Add,
    Sub,
    Mul,
    Div,
    Minimum,
    Maximum,
    AddScalar,
    MulScalar { c: T },
    LeakyRelu { slope: T },
    Sigmoid,
    Exp,
    Clamp { lo: T, hi: T },
    Bce,
    BceLogits,
    Gather { indices: Rc<Vec<usize>> },
    Sum,
    Mean,
}

struct Node<T: Scalar> {
    inputs: Vec<Tensor<T>>,
    output: Tensor<T>,
    rule: Rule<T>,
}

/// Records differentiable operations and replays them in reverse.
pub struct Tape<T: Scalar> {
    uid: u64,
    recording: bool,
    consumed: bool,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    /// Tape that records nodes for tensors with gradients enabled.
    pub fn new() -> Self {
        Tape {
            uid: TAPE_COUNTER.fetch_add(1, Ordering::Relaxed),
            recording: true,
            consumed: false,
            nodes: Vec::new(),
        }
    }

    /// Tape that never records: forward-only inference with no activation
    /// retention.
    pub fn inference() -> Self {
        Tape {
            uid: TAPE_COUNTER.fetch_add(1, Ordering::Relaxed),
            recording: false,
            consumed: false,
            nodes: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn wants_node(&self, inputs: &[&Tensor<T>]) -> bool {
        self.recording && inputs.iter().any(|t| t.borrow().grad_enabled)
    }

    fn emit(&mut self, inputs: &[&Tensor<T>], data: Vec<T>, shape: Vec<usize>, rule: Rule<T>) -> Tensor<T> {
        let record = self.wants_node(inputs);
        let out = Tensor::from_parts(data, shape, record);
        if record {
            out.borrow_mut().produced_by = Some(self.uid);
            self.nodes.push(Node {
                inputs: inputs.iter().map(|t| (*t).clone()).collect(),
                output: out.clone(),
                rule,
            });
        }
        out
    }

    // ── Structured ops ─────────────────────────────────────────────────

    /// 2-D convolution over NCHW input with an OIHW kernel and per-channel
    /// bias. Output spatial size is floor((H + 2p - k) / s) + 1.
    pub fn conv2d(
        &mut self,
        input: &Tensor<T>,
        kernel: &Tensor<T>,
        bias: &Tensor<T>,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor<T>> {
        let in_shape = input.shape();
        let k_shape = kernel.shape();
        let b_shape = bias.shape();
        if in_shape.len() != 4 {
            return Err(Error::Shape(format!(
                "conv2d input must be NCHW, got {in_shape:?}"
            )));
        }
        if k_shape.len() != 4 {
            return Err(Error::Shape(format!(
                "conv2d kernel must be [out, in, kh, kw], got {k_shape:?}"
            )));
        }
        if b_shape.len() != 1 || b_shape[0] != k_shape[0] {
            return Err(Error::Shape(format!(
                "conv2d bias must be [{}], got {b_shape:?}",
                k_shape[0]
            )));
        }
        if in_shape[1] != k_shape[1] {
            return Err(Error::Shape(format!(
                "conv2d channel mismatch: input has {} channels, kernel expects {}",
                in_shape[1], k_shape[1]
            )));
        }
        if stride == 0 {
            return Err(Error::Shape("conv2d stride must be >= 1".into()));
        }
        let (h, w) = (in_shape[2], in_shape[3]);
        let (kh, kw) = (k_shape[2], k_shape[3]);
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(Error::Shape(format!(
                "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            )));
        }
        let d = ConvDims {
            n: in_shape[0],
            c_in: in_shape[1],
            h,
            w,
            c_out: k_shape[0],
            kh,
            kw,
            stride,
            padding,
            h_out: (h + 2 * padding - kh) / stride + 1,
            w_out: (w + 2 * padding - kw) / stride + 1,
        };
        let out = {
            let xi = input.borrow();
            let ki = kernel.borrow();
            let bi = bias.borrow();
            kernels::conv2d_forward(&xi.data, &ki.data, &bi.data, &d)
        };
        let shape = vec![d.n, d.c_out, d.h_out, d.w_out];
        Ok(self.emit(&[input, kernel, bias], out, shape, Rule::Conv2d(d)))
    }

    /// Max pooling with out-of-bounds taps treated as negative infinity.
    /// Gradient routes to the first maximal element in row-major window
    /// order.
    pub fn maxpool2d(
        &mut self,
        input: &Tensor<T>,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor<T>> {
        let s = input.shape();
        if s.len() != 4 {
            return Err(Error::Shape(format!(
                "maxpool2d input must be NCHW, got {s:?}"
            )));
        }
        if k == 0 || stride == 0 {
            return Err(Error::Shape(
                "maxpool2d kernel and stride must be >= 1".into(),
            ));
        }
        if padding >= k {
            return Err(Error::Shape(format!(
                "maxpool2d padding {padding} must be smaller than kernel {k}"
            )));
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        if h + 2 * padding < k || w + 2 * padding < k {
            return Err(Error::Shape(format!(
                "maxpool2d window {k} larger than padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            )));
        }
        let (out, argmax, h_out, w_out) = {
            let xi = input.borrow();
            kernels::maxpool2d_forward(&xi.data, n, c, h, w, k, stride, padding)
        };
        Ok(self.emit(
            &[input],
            out,
            vec![n, c, h_out, w_out],
            Rule::MaxPool2d { argmax },
        ))
    }

    /// Nearest-neighbor upsampling by an integer factor.
    pub fn upsample_nearest(&mut self, input: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
        let s = input.shape();
        if s.len() != 4 {
            return Err(Error::Shape(format!(
                "upsample input must be NCHW, got {s:?}"
            )));
        }
        if factor == 0 {
            return Err(Error::Shape("upsample factor must be >= 1".into()));
        }
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        let out = {
            let xi = input.borrow();
            kernels::upsample_forward(&xi.data, n, c, h, w, factor)
        };
        Ok(self.emit(
            &[input],
            out,
            vec![n, c, h * factor, w * factor],
            Rule::UpsampleNearest { factor },
        ))
    }

    /// Concatenate along the channel axis (axis 1 on NCHW tensors).
    pub fn concat(&mut self, inputs: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        if axis != 1 {
            return Err(Error::Shape(format!(
                "concat supports the channel axis (1) only, got axis {axis}"
            )));
        }
        if inputs.is_empty() {
            return Err(Error::Shape("concat needs at least one input".into()));
        }
        let first = inputs[0].shape();
        if first.len() != 4 {
            return Err(Error::Shape(format!(
                "concat inputs must be NCHW, got {first:?}"
            )));
        }
        let (n, h, w) = (first[0], first[2], first[3]);
        let mut c_total = 0;
        for t in inputs {
            let s = t.shape();
            if s.len() != 4 || s[0] != n || s[2] != h || s[3] != w {
                return Err(Error::Shape(format!(
                    "concat operands must agree outside the channel axis: {first:?} vs {s:?}"
                )));
            }
            c_total += s[1];
        }
        let hw = h * w;
        let mut out = vec![T::zero(); n * c_total * hw];
        for b in 0..n {
            let mut c_off = 0;
            for t in inputs {
                let ti = t.borrow();
                let c = ti.shape[1];
                let src = b * c * hw;
                let dst = (b * c_total + c_off) * hw;
                out[dst..dst + c * hw].copy_from_slice(&ti.data[src..src + c * hw]);
                c_off += c;
            }
        }
        Ok(self.emit(inputs, out, vec![n, c_total, h, w], Rule::Concat))
    }

    /// Split into `parts` equal channel groups; inverse of [`Tape::concat`].
    pub fn split_channels(&mut self, input: &Tensor<T>, parts: usize) -> Result<Vec<Tensor<T>>> {
        let s = input.shape();
        if s.len() != 4 {
            return Err(Error::Shape(format!(
                "split_channels input must be NCHW, got {s:?}"
            )));
        }
        if parts == 0 || s[1] % parts != 0 {
            return Err(Error::Shape(format!(
                "cannot split {} channels into {parts} equal parts",
                s[1]
            )));
        }
        let each = s[1] / parts;
        (0..parts)
            .map(|i| self.slice_channels(input, i * each, each))
            .collect()
    }

    /// View of channels `[start, start + len)` as a fresh tensor.
    pub fn slice_channels(&mut self, input: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
        let s = input.shape();
        if s.len() != 4 {
            return Err(Error::Shape(format!(
                "slice_channels input must be NCHW, got {s:?}"
            )));
        }
        if len == 0 || start + len > s[1] {
            return Err(Error::Shape(format!(
                "channel slice [{start}, {}) out of range for {} channels",
                start + len,
                s[1]
            )));
        }
        let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
        let out = {
            let xi = input.borrow();
            kernels::slice_channels_forward(&xi.data, n, c, hw, start, len)
        };
        Ok(self.emit(
            &[input],
            out,
            vec![n, len, s[2], s[3]],
            Rule::SliceChannels { start },
        ))
    }

    // ── Elementwise ops ────────────────────────────────────────────────

    /// Generic elementwise entry point. Binary kinds require `b`; unary
    /// kinds reject it. `LeakyRelu` uses the standard slope 0.1.
    pub fn elementwise(
        &mut self,
        kind: ElemKind,
        a: &Tensor<T>,
        b: Option<&Tensor<T>>,
    ) -> Result<Tensor<T>> {
        let need_b = matches!(kind, ElemKind::Add | ElemKind::Sub | ElemKind::Mul | ElemKind::Bce);
        match (need_b, b) {
            (true, None) => {
                return Err(Error::Shape(format!(
                    "elementwise {kind:?} requires a second operand"
                )))
            }
            (false, Some(_)) => {
                return Err(Error::Shape(format!(
                    "elementwise {kind:?} takes a single operand"
                )))
            }
            _ => {}
        }
        match kind {
            ElemKind::Add => self.add(a, b.unwrap()),
            ElemKind::Sub => self.sub(a, b.unwrap()),
            ElemKind::Mul => self.mul(a, b.unwrap()),
            ElemKind::LeakyRelu => self.leaky_relu(a, T::from_f64(0.1)),
            ElemKind::Sigmoid => self.sigmoid(a),
            ElemKind::Bce => self.bce(a, b.unwrap()),
        }
    }

    fn binary_check(&self, op: &str, a: &Tensor<T>, b: &Tensor<T>) -> Result<Vec<usize>> {
        let sa = a.shape();
        let sb = b.shape();
        if sa == sb {
            return Ok(sa);
        }
        if a.numel() == 1 {
            return Ok(sb);
        }
        if b.numel() == 1 {
            return Ok(sa);
        }
        Err(Error::Shape(format!(
            "{op}: shapes {sa:?} and {sb:?} differ (only scalar broadcast is supported)"
        )))
    }

    fn binary(
        &mut self,
        a: &Tensor<T>,
        b: &Tensor<T>,
        out_shape: Vec<usize>,
        f: impl Fn(T, T) -> T,
        rule: Rule<T>,
    ) -> Tensor<T> {
        let out = {
            let ai = a.borrow();
            let bi = b.borrow();
            let n = ai.data.len().max(bi.data.len());
            let mut out = Vec::with_capacity(n);
            if ai.data.len() == bi.data.len() {
                for i in 0..n {
                    out.push(f(ai.data[i], bi.data[i]));
                }
            } else if ai.data.len() == 1 {
                for i in 0..n {
                    out.push(f(ai.data[0], bi.data[i]));
                }
            } else {
                for i in 0..n {
                    out.push(f(ai.data[i], bi.data[0]));
                }
            }
            out
        };
        self.emit(&[a, b], out, out_shape, rule)
    }

    pub fn add(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.binary_check("add", a, b)?;
        Ok(self.binary(a, b, shape, |x, y| x + y, Rule::Add))
    }

    pub fn sub(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.binary_check("sub", a, b)?;
        Ok(self.binary(a, b, shape, |x, y| x - y, Rule::Sub))
    }

    pub fn mul(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.binary_check("mul", a, b)?;
        Ok(self.binary(a, b, shape, |x, y| x * y, Rule::Mul))
    }

    pub fn div(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.binary_check("div", a, b)?;
        Ok(self.binary(a, b, shape, |x, y| x / y, Rule::Div))
    }

    /// Elementwise minimum; gradient follows the smaller operand (the first
    /// on ties).
    pub fn minimum(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.binary_check("minimum", a, b)?;
        Ok(self.binary(a, b, shape, |x, y| if x <= y { x } else { y }, Rule::Minimum))
    }

    /// Elementwise maximum; gradient follows the larger operand (the first
    /// on ties).
    pub fn maximum(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.binary_check("maximum", a, b)?;
        Ok(self.binary(a, b, shape, |x, y| if x >= y { x } else { y }, Rule::Maximum))
    }

    pub fn add_scalar(&mut self, a: &Tensor<T>, c: T) -> Tensor<T> {
        let out = a.borrow().data.iter().map(|&v| v + c).collect();
        self.emit(&[a], out, a.shape(), Rule::AddScalar)
    }

    pub fn mul_scalar(&mut self, a: &Tensor<T>, c: T) -> Tensor<T> {
        let out = a.borrow().data.iter().map(|&v| v * c).collect();
        self.emit(&[a], out, a.shape(), Rule::MulScalar { c })
    }

    /// max(x, slope * x); slope 0.1 is the network default.
    pub fn leaky_relu(&mut self, a: &Tensor<T>, slope: T) -> Result<Tensor<T>> {
        let out = a
            .borrow()
            .data
            .iter()
            .map(|&v| if v >= T::zero() { v } else { v * slope })
            .collect();
        Ok(self.emit(&[a], out, a.shape(), Rule::LeakyRelu { slope }))
    }

    pub fn sigmoid(&mut self, a: &Tensor<T>) -> Result<Tensor<T>> {
        let out = a
            .borrow()
            .data
            .iter()
            .map(|&v| T::one() / (T::one() + (-v).exp()))
            .collect();
        Ok(self.emit(&[a], out, a.shape(), Rule::Sigmoid))
    }

    pub fn exp(&mut self, a: &Tensor<T>) -> Result<Tensor<T>> {
        let out = a.borrow().data.iter().map(|&v| v.exp()).collect();
        Ok(self.emit(&[a], out, a.shape(), Rule::Exp))
    }

    /// Clamp to [lo, hi]; gradient passes only where the input is within
    /// the closed interval.
    pub fn clamp(&mut self, a: &Tensor<T>, lo: T, hi: T) -> Result<Tensor<T>> {
        if lo > hi {
            return Err(Error::Shape(format!("clamp bounds inverted: {lo} > {hi}")));
        }
        let out = a
            .borrow()
            .data
            .iter()
            .map(|&v| if v < lo { lo } else if v > hi { hi } else { v })
            .collect();
        Ok(self.emit(&[a], out, a.shape(), Rule::Clamp { lo, hi }))
    }

    /// Elementwise binary cross-entropy of probabilities `p` against
    /// targets `t` in [0, 1]; probabilities are clamped to
    /// [1e-7, 1 - 1e-7] so the result stays finite.
    pub fn bce(&mut self, p: &Tensor<T>, t: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.binary_check("bce", p, t)?;
        Ok(self.binary(p, t, shape, kernels::bce_value, Rule::Bce))
    }

    /// Select elements by flat index into a 1-D tensor; duplicate indices
    /// accumulate gradient on the shared source element.
    pub fn gather(&mut self, a: &Tensor<T>, indices: Rc<Vec<usize>>) -> Result<Tensor<T>> {
        let n = a.numel();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Shape(format!(
                "gather index {bad} out of range for {n} elements"
            )));
        }
        let out = {
            let ai = a.borrow();
            indices.iter().map(|&i| ai.data[i]).collect()
        };
        let len = indices.len();
        Ok(self.emit(&[a], out, vec![len], Rule::Gather { indices }))
    }

    /// Sum of all elements as a scalar tensor.
    pub fn sum(&mut self, a: &Tensor<T>) -> Result<Tensor<T>> {
        let total = a
            .borrow()
            .data
            .iter()
            .fold(T::zero(), |acc, &v| acc + v);
        Ok(self.emit(&[a], vec![total], vec![1], Rule::Sum))
    }

    /// Mean of all elements as a scalar tensor.
    pub fn mean(&mut self, a: &Tensor<T>) -> Result<Tensor<T>> {
        let n = a.numel();
        if n == 0 {
            return Err(Error::Shape("mean of an empty tensor".into()));
        }
        let total = a
            .borrow()
            .data
            .iter()
            .fold(T::zero(), |acc, &v| acc + v);
        Ok(self.emit(
            &[a],
            vec![total / T::from_f64(n as f64)],
            vec![1],
            Rule::Mean,
        ))
    }

    // ── Backward ───────────────────────────────────────────────────────

    /// Propagate d(loss)/d(tensor) to every tensor recorded on this tape.
    ///
    /// `loss` must be a single-element tensor produced by this tape. The
    /// node list is dropped afterwards; calling backward a second time is a
    /// state error. Gradients accumulate into any pre-existing buffers, so
    /// leaves must be zeroed between steps by the caller.
    pub fn backward(&mut self, loss: &Tensor<T>) -> Result<()> {
        if self.consumed {
            return Err(Error::State(
                "backward already ran on this tape".into(),
            ));
        }
        if loss.numel() != 1 {
            return Err(Error::State(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape()
            )));
        }
        if loss.borrow().produced_by != Some(self.uid) {
            return Err(Error::State(
                "loss tensor was not produced by this tape".into(),
            ));
        }
        self.consumed = true;
        loss.accumulate_grad(&[T::one()]);

        for node in self.nodes.iter().rev() {
            let g_out = match node.output.borrow().grad.clone() {
                Some(g) => g,
                None => continue,
            };
            apply_rule(node, &g_out);
        }
        self.nodes.clear();
        Ok(())
    }
}

/// Compute and deposit the input gradients for one node.
fn apply_rule<T: Scalar>(node: &Node<T>, g_out: &[T]) {
    match &node.rule {
        Rule::Conv2d(d) => {
            let (g_in, g_k, g_b) = {
                let xi = node.inputs[0].borrow();
                let ki = node.inputs[1].borrow();
                kernels::conv2d_backward(&xi.data, &ki.data, g_out, d)
            };
            node.inputs[0].accumulate_grad(&g_in);
            node.inputs[1].accumulate_grad(&g_k);
            node.inputs[2].accumulate_grad(&g_b);
        }
        Rule::MaxPool2d { argmax } => {
            let g_in = kernels::maxpool2d_backward(g_out, argmax, node.inputs[0].numel());
            node.inputs[0].accumulate_grad(&g_in);
        }
        Rule::UpsampleNearest { factor } => {
            let s = node.inputs[0].shape();
            let g_in = kernels::upsample_backward(g_out, s[0], s[1], s[2], s[3], *factor);
            node.inputs[0].accumulate_grad(&g_in);
        }
        Rule::Concat => {
            let out_shape = node.output.shape();
            let (n, c_total, hw) = (out_shape[0], out_shape[1], out_shape[2] * out_shape[3]);
            let mut c_off = 0;
            for input in &node.inputs {
                let s = input.shape();
                let c = s[1];
                let mut g_in = vec![T::zero(); n * c * hw];
                for b in 0..n {
                    let src = (b * c_total + c_off) * hw;
                    let dst = b * c * hw;
                    g_in[dst..dst + c * hw].copy_from_slice(&g_out[src..src + c * hw]);
                }
                input.accumulate_grad(&g_in);
                c_off += c;
            }
        }
        Rule::SliceChannels { start } => {
            let s = node.inputs[0].shape();
            let out_shape = node.output.shape();
            let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
            let mut g_in = vec![T::zero(); n * c * hw];
            kernels::slice_channels_backward(g_out, &mut g_in, n, c, hw, *start, out_shape[1]);
            node.inputs[0].accumulate_grad(&g_in);
        }
        Rule::Add => binary_backward(node, g_out, |_, _, g| (g, g)),
        Rule::Sub => binary_backward(node, g_out, |_, _, g| (g, -g)),
        Rule::Mul => binary_backward(node, g_out, |a, b, g| (g * b, g * a)),
        Rule::Div => binary_backward(node, g_out, |a, b, g| (g / b, -g * a / (b * b))),
        Rule::Minimum => binary_backward(node, g_out, |a, b, g| {
            if a <= b {
                (g, T::zero())
            } else {
                (T::zero(), g)
            }
        }),
        Rule::Maximum => binary_backward(node, g_out, |a, b, g| {
            if a >= b {
                (g, T::zero())
            } else {
                (T::zero(), g)
            }
        }),
        Rule::AddScalar => node.inputs[0].accumulate_grad(g_out),
        Rule::MulScalar { c } => {
            let g: Vec<T> = g_out.iter().map(|&g| g * *c).collect();
            node.inputs[0].accumulate_grad(&g);
        }
        Rule::LeakyRelu { slope } => {
            let g: Vec<T> = {
                let xi = node.inputs[0].borrow();
                xi.data
                    .iter()
                    .zip(g_out.iter())
                    .map(|(&x, &g)| if x >= T::zero() { g } else { g * *slope })
                    .collect()
            };
            node.inputs[0].accumulate_grad(&g);
        }
        Rule::Sigmoid => {
            let g: Vec<T> = {
                let yo = node.output.borrow();
                yo.data
                    .iter()
                    .zip(g_out.iter())
                    .map(|(&y, &g)| g * y * (T::one() - y))
                    .collect()
            };
            node.inputs[0].accumulate_grad(&g);
        }
        Rule::Exp => {
            let g: Vec<T> = {
                let yo = node.output.borrow();
                yo.data
                    .iter()
                    .zip(g_out.iter())
                    .map(|(&y, &g)| g * y)
                    .collect()
            };
            node.inputs[0].accumulate_grad(&g);
        }
        Rule::Clamp { lo, hi } => {
            let g: Vec<T> = {
                let xi = node.inputs[0].borrow();
                xi.data
                    .iter()
                    .zip(g_out.iter())
                    .map(|(&x, &g)| if x >= *lo && x <= *hi { g } else { T::zero() })
                    .collect()
            };
            node.inputs[0].accumulate_grad(&g);
        }
        // The probability clamp is a numerical guard, not part of the loss
        // semantics, so the gradient is the true BCE gradient evaluated at
        // the clamped probability: finite (|dp| <= ~1e7) and, crucially,
        // nonzero for saturated inputs, so a collapsed sigmoid can recover.
        Rule::Bce => binary_backward(node, g_out, |p, t, g| {
            let pc = kernels::bce_clamp(p);
            let dp = g * (pc - t) / (pc * (T::one() - pc));
            let dt = g * ((T::one() - pc).ln() - pc.ln());
            (dp, dt)
        }),
        Rule::Gather { indices } => {
            let mut g_in = vec![T::zero(); node.inputs[0].numel()];
            kernels::gather_backward(g_out, indices, &mut g_in);
            node.inputs[0].accumulate_grad(&g_in);
        }
        Rule::Sum => {
            let g = vec![g_out[0]; node.inputs[0].numel()];
            node.inputs[0].accumulate_grad(&g);
        }
        Rule::Mean => {
            let n = node.inputs[0].numel();
            let g = vec![g_out[0] / T::from_f64(n as f64); n];
            node.inputs[0].accumulate_grad(&g);
        }
    }
}

/// Shared backward for binary elementwise ops, handling the three layout
/// cases (equal shapes, scalar left, scalar right). `f(a, b, g)` returns
/// the per-element contributions to each operand's gradient.
fn binary_backward<T: Scalar>(node: &Node<T>, g_out: &[T], f: impl Fn(T, T, T) -> (T, T)) {
    let (g_a, g_b) = {
        let ai = node.inputs[0].borrow();
        let bi = node.inputs[1].borrow();
        let (la, lb) = (ai.data.len(), bi.data.len());
        let mut g_a = vec![T::zero(); la];
        let mut g_b = vec![T::zero(); lb];
        for i in 0..g_out.len() {
            let av = ai.data[if la == 1 { 0 } else { i }];
            let bv = bi.data[if lb == 1 { 0 } else { i }];
            let (da, db) = f(av, bv, g_out[i]);
            g_a[if la == 1 { 0 } else { i }] += da;
            g_b[if lb == 1 { 0 } else { i }] += db;
        }
        (g_a, g_b)
    };
    node.inputs[0].accumulate_grad(&g_a);
    node.inputs[1].accumulate_grad(&g_b);
}
