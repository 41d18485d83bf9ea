//! Forward and backward numeric kernels over flat row-major buffers.
//!
//! All routines assume shapes were validated by the caller (the tape layer);
//! internal consistency is guarded with debug assertions only. Convolution
//! and pooling use NCHW layout. Loops are plain and single-threaded so that
//! results are bitwise reproducible run to run.

use super::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvDims {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvDims {
    pub fn out_len(&self) -> usize {
        self.n * self.c_out * self.h_out * self.w_out
    }
}

/// Direct convolution (cross-correlation), bias added per output channel.
pub fn conv2d_forward<T: Scalar>(input: &[T], kernel: &[T], bias: &[T], d: &ConvDims) -> Vec<T> {
    let mut out = vec![T::zero(); d.out_len()];
    for b in 0..d.n {
        for co in 0..d.c_out {
            for oy in 0..d.h_out {
                let iy0 = (oy * d.stride) as isize - d.padding as isize;
                let ky_lo = (-iy0).max(0) as usize;
                let ky_hi = d.kh.min((d.h as isize - iy0).max(0) as usize);
                for ox in 0..d.w_out {
                    let ix0 = (ox * d.stride) as isize - d.padding as isize;
                    let kx_lo = (-ix0).max(0) as usize;
                    let kx_hi = d.kw.min((d.w as isize - ix0).max(0) as usize);
                    let mut acc = bias[co];
                    for ci in 0..d.c_in {
                        let in_plane = (b * d.c_in + ci) * d.h * d.w;
                        let k_plane = (co * d.c_in + ci) * d.kh * d.kw;
                        for ky in ky_lo..ky_hi {
                            let iy = (iy0 + ky as isize) as usize;
                            let in_row = in_plane + iy * d.w;
                            let k_row = k_plane + ky * d.kw;
                            let ix_start = (ix0 + kx_lo as isize) as usize;
                            let xs = &input[in_row + ix_start..in_row + ix_start + (kx_hi - kx_lo)];
                            let ks = &kernel[k_row + kx_lo..k_row + kx_hi];
                            for (x, k) in xs.iter().zip(ks.iter()) {
                                acc = acc + *x * *k;
                            }
                        }
                    }
                    out[((b * d.c_out + co) * d.h_out + oy) * d.w_out + ox] = acc;
                }
            }
        }
    }
    out
}

/// Gradients of conv2d with respect to input, kernel, and bias.
pub fn conv2d_backward<T: Scalar>(
    input: &[T],
    kernel: &[T],
    grad_out: &[T],
    d: &ConvDims,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut g_in = vec![T::zero(); d.n * d.c_in * d.h * d.w];
    let mut g_k = vec![T::zero(); d.c_out * d.c_in * d.kh * d.kw];
    let mut g_b = vec![T::zero(); d.c_out];
    for b in 0..d.n {
        for co in 0..d.c_out {
            for oy in 0..d.h_out {
                let iy0 = (oy * d.stride) as isize - d.padding as isize;
                let ky_lo = (-iy0).max(0) as usize;
                let ky_hi = d.kh.min((d.h as isize - iy0).max(0) as usize);
                for ox in 0..d.w_out {
                    let g = grad_out[((b * d.c_out + co) * d.h_out + oy) * d.w_out + ox];
                    if g == T::zero() {
                        continue;
                    }
                    let ix0 = (ox * d.stride) as isize - d.padding as isize;
                    let kx_lo = (-ix0).max(0) as usize;
                    let kx_hi = d.kw.min((d.w as isize - ix0).max(0) as usize);
                    g_b[co] += g;
                    for ci in 0..d.c_in {
                        let in_plane = (b * d.c_in + ci) * d.h * d.w;
                        let k_plane = (co * d.c_in + ci) * d.kh * d.kw;
                        for ky in ky_lo..ky_hi {
                            let iy = (iy0 + ky as isize) as usize;
                            let in_row = in_plane + iy * d.w;
                            let k_row = k_plane + ky * d.kw;
                            for kx in kx_lo..kx_hi {
                                let ix = (ix0 + kx as isize) as usize;
                                g_in[in_row + ix] += g * kernel[k_row + kx];
                                g_k[k_row + kx] += g * input[in_row + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    (g_in, g_k, g_b)
}

/// Max pooling; out-of-bounds taps read negative infinity. Returns the
/// pooled values and the flat input index of each selected maximum (first
/// maximal position in row-major window order).
pub fn maxpool2d_forward<T: Scalar>(
    input: &[T],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> (Vec<T>, Vec<usize>, usize, usize) {
    let h_out = (h + 2 * padding - k) / stride + 1;
    let w_out = (w + 2 * padding - k) / stride + 1;
    let mut out = vec![T::zero(); n * c * h_out * w_out];
    let mut argmax = vec![0usize; out.len()];
    for b in 0..n {
        for ch in 0..c {
            let plane = (b * c + ch) * h * w;
            for oy in 0..h_out {
                for ox in 0..w_out {
                    let mut best = T::neg_infinity();
                    let mut best_idx = usize::MAX;
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            let idx = plane + iy as usize * w + ix as usize;
                            let v = input[idx];
                            if v > best {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    let o = ((b * c + ch) * h_out + oy) * w_out + ox;
                    out[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
    }
    (out, argmax, h_out, w_out)
}

pub fn maxpool2d_backward<T: Scalar>(grad_out: &[T], argmax: &[usize], in_len: usize) -> Vec<T> {
    let mut g_in = vec![T::zero(); in_len];
    for (g, &idx) in grad_out.iter().zip(argmax.iter()) {
        if idx != usize::MAX {
            g_in[idx] += *g;
        }
    }
    g_in
}

/// Nearest-neighbor upsampling by an integer factor on NCHW data.
pub fn upsample_forward<T: Scalar>(
    input: &[T],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    factor: usize,
) -> Vec<T> {
    let (h2, w2) = (h * factor, w * factor);
    let mut out = vec![T::zero(); n * c * h2 * w2];
    for b in 0..n {
        for ch in 0..c {
            let in_plane = (b * c + ch) * h * w;
            let out_plane = (b * c + ch) * h2 * w2;
            for oy in 0..h2 {
                let iy = oy / factor;
                for ox in 0..w2 {
                    out[out_plane + oy * w2 + ox] = input[in_plane + iy * w + ox / factor];
                }
            }
        }
    }
    out
}

/// Each input cell receives the sum of gradients over its replicated block.
pub fn upsample_backward<T: Scalar>(
    grad_out: &[T],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    factor: usize,
) -> Vec<T> {
    let (h2, w2) = (h * factor, w * factor);
    let mut g_in = vec![T::zero(); n * c * h * w];
    for b in 0..n {
        for ch in 0..c {
            let in_plane = (b * c + ch) * h * w;
            let out_plane = (b * c + ch) * h2 * w2;
            for oy in 0..h2 {
                let iy = oy / factor;
                for ox in 0..w2 {
                    g_in[in_plane + iy * w + ox / factor] += grad_out[out_plane + oy * w2 + ox];
                }
            }
        }
    }
    g_in
}

/// Copy a channel range `[start, start+len)` of NCHW `input` into a fresh
/// buffer (the forward of channel slicing).
pub fn slice_channels_forward<T: Scalar>(
    input: &[T],
    n: usize,
    c: usize,
    hw: usize,
    start: usize,
    len: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); n * len * hw];
    for b in 0..n {
        let src = (b * c + start) * hw;
        let dst = b * len * hw;
        out[dst..dst + len * hw].copy_from_slice(&input[src..src + len * hw]);
    }
    out
}

/// Scatter a slice gradient back into the channel range of the input grad.
pub fn slice_channels_backward<T: Scalar>(
    grad_out: &[T],
    g_in: &mut [T],
    n: usize,
    c: usize,
    hw: usize,
    start: usize,
    len: usize,
) {
    for b in 0..n {
        let dst = (b * c + start) * hw;
        let src = b * len * hw;
        for i in 0..len * hw {
            g_in[dst + i] += grad_out[src + i];
        }
    }
}

/// Stack channel gradients of a gathered flat-index selection back onto the
/// source (duplicate indices accumulate).
pub fn gather_backward<T: Scalar>(grad_out: &[T], indices: &[usize], g_in: &mut [T]) {
    for (g, &idx) in grad_out.iter().zip(indices.iter()) {
        g_in[idx] += *g;
    }
}

/// Probability clamp used by binary cross-entropy.
pub fn bce_clamp<T: Scalar>(p: T) -> T {
    let lo = T::from_f64(1e-7);
    let hi = T::one() - lo;
    if p < lo {
        lo
    } else if p > hi {
        hi
    } else {
        p
    }
}

/// Elementwise binary cross-entropy: -t*ln(p) - (1-t)*ln(1-p) with p
/// clamped to [1e-7, 1 - 1e-7].
pub fn bce_value<T: Scalar>(p: T, t: T) -> T {
    let pc = bce_clamp(p);
    -(t * pc.ln() + (T::one() - t) * (T::one() - pc).ln())
}

/// Logistic sigmoid, total over all finite inputs (saturates to exactly
/// 0 or 1 at extreme magnitudes instead of overflowing).
pub fn sigmoid_value<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Binary cross-entropy of sigmoid(z) against target t, computed from the
/// logit as max(z, 0) - t*z + ln(1 + e^{-|z|}). Algebraically equal to
/// `bce_value(sigmoid(z), t)` but finite at any logit magnitude and with a
/// gradient (sigmoid(z) - t) that never underflows, so saturated logits
/// keep learning.
pub fn bce_logits_value<T: Scalar>(z: T, t: T) -> T {
    let pos = if z > T::zero() { z } else { T::zero() };
    pos - t * z + (T::one() + (-z.abs()).exp()).ln()
}
