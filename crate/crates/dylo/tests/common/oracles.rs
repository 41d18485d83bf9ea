//! Independent reference implementations used to judge the library.
//!
//! Everything in this module is written directly from the defining formula,
//! in plain f64, with no code shared with the crate under test. Deliberately
//! slow and obvious: nested loops, no reuse of intermediate state, no
//! vectorization. If the crate and these oracles agree, the agreement is
//! meaningful because the two routes are computationally unrelated.

#![allow(dead_code)]

/// Central finite difference of a scalar function at `x` with step `h`.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Gradient agreement test: passes when the analytic value is within
/// relative tolerance of the numeric one, with an absolute floor for
/// gradients that are themselves ~0 (where relative error is meaningless).
pub fn grads_agree(analytic: f64, numeric: f64, rel_tol: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= rel_tol * analytic.abs().max(numeric.abs()) || diff <= 1e-7
}

// ---------------------------------------------------------------------------
// Convolution / pooling references
// ---------------------------------------------------------------------------

/// Direct-sum 2D convolution (cross-correlation) over NCHW data.
///
/// `input` is `[n, c_in, h, w]`, `kernel` is `[c_out, c_in, kh, kw]`,
/// `bias` is `[c_out]`. Returns the output buffer and its NCHW shape.
pub fn conv2d_ref(
    input: &[f64],
    in_shape: (usize, usize, usize, usize),
    kernel: &[f64],
    k_shape: (usize, usize, usize, usize),
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> (Vec<f64>, (usize, usize, usize, usize)) {
    let (n, c_in, h, w) = in_shape;
    let (c_out, kc, kh, kw) = k_shape;
    assert_eq!(c_in, kc, "oracle: channel mismatch");
    let h_out = (h + 2 * padding - kh) / stride + 1;
    let w_out = (w + 2 * padding - kw) / stride + 1;
    let mut out = vec![0.0; n * c_out * h_out * w_out];
    for b in 0..n {
        for co in 0..c_out {
            for oy in 0..h_out {
                for ox in 0..w_out {
                    let mut acc = bias[co];
                    for ci in 0..c_in {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w {
                                    let iv = input
                                        [((b * c_in + ci) * h + iy as usize) * w + ix as usize];
                                    let kv = kernel[((co * kc + ci) * kh + ky) * kw + kx];
                                    acc += iv * kv;
                                }
                            }
                        }
                    }
                    out[((b * c_out + co) * h_out + oy) * w_out + ox] = acc;
                }
            }
        }
    }
    (out, (n, c_out, h_out, w_out))
}

/// Direct max pooling over NCHW data. Out-of-bounds taps read as -inf.
pub fn maxpool2d_ref(
    input: &[f64],
    in_shape: (usize, usize, usize, usize),
    k: usize,
    stride: usize,
    padding: usize,
) -> (Vec<f64>, (usize, usize, usize, usize)) {
    let (n, c, h, w) = in_shape;
    let h_out = (h + 2 * padding - k) / stride + 1;
    let w_out = (w + 2 * padding - k) / stride + 1;
    let mut out = vec![0.0; n * c * h_out * w_out];
    for b in 0..n {
        for ch in 0..c {
            for oy in 0..h_out {
                for ox in 0..w_out {
                    let mut best = f64::NEG_INFINITY;
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < w {
                                let v = input[((b * c + ch) * h + iy as usize) * w + ix as usize];
                                if v > best {
                                    best = v;
                                }
                            }
                        }
                    }
                    out[((b * c + ch) * h_out + oy) * w_out + ox] = best;
                }
            }
        }
    }
    (out, (n, c, h_out, w_out))
}

// ---------------------------------------------------------------------------
// Optimizer reference
// ---------------------------------------------------------------------------

/// Textbook Adam with decoupled weight decay, kept per-parameter in f64.
///
/// Update order per step `t` (1-based):
///   theta  <- theta - alpha * wd * theta          (decay first)
///   m      <- b1 * m + (1 - b1) * g
///   v      <- b2 * v + (1 - b2) * g^2
///   m_hat  =  m / (1 - b1^t)
///   v_hat  =  v / (1 - b2^t)
///   theta  <- theta - alpha * m_hat / (sqrt(v_hat) + eps)
pub struct AdamRef {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamRef {
    pub fn new(dim: usize, alpha: f64, weight_decay: f64) -> Self {
        AdamRef {
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..theta.len() {
            theta[i] -= self.alpha * self.weight_decay * theta[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.alpha * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Geometry references
// ---------------------------------------------------------------------------

/// IoU by counting sub-pixel samples on a fine grid (step 0.01), restricted
/// to the bounding rectangle of the two boxes. Boxes are corner form
/// `[x1, y1, x2, y2]`. A sample point belongs to a box when its center lies
/// inside the half-open extent.
pub fn iou_raster(a: [f64; 4], b: [f64; 4]) -> f64 {
    const STEP: f64 = 0.01;
    let x_lo = a[0].min(b[0]) - STEP;
    let y_lo = a[1].min(b[1]) - STEP;
    let x_hi = a[2].max(b[2]) + STEP;
    let y_hi = a[3].max(b[3]) + STEP;
    let nx = ((x_hi - x_lo) / STEP).ceil() as usize;
    let ny = ((y_hi - y_lo) / STEP).ceil() as usize;
    let mut in_a = 0u64;
    let mut in_b = 0u64;
    let mut in_both = 0u64;
    for iy in 0..ny {
        let y = y_lo + (iy as f64 + 0.5) * STEP;
        for ix in 0..nx {
            let x = x_lo + (ix as f64 + 0.5) * STEP;
            let pa = x >= a[0] && x < a[2] && y >= a[1] && y < a[3];
            let pb = x >= b[0] && x < b[2] && y >= b[1] && y < b[3];
            in_a += pa as u64;
            in_b += pb as u64;
            in_both += (pa && pb) as u64;
        }
    }
    let union = in_a + in_b - in_both;
    if union == 0 {
        return 0.0;
    }
    in_both as f64 / union as f64
}

// ---------------------------------------------------------------------------
// Average precision reference
// ---------------------------------------------------------------------------

/// All-points-interpolated AP by exhaustive threshold sweep.
///
/// `outcomes` holds `(score, is_true_positive)` for every detection of one
/// class; `num_gt` is the number of ground-truth boxes of that class.
/// For every distinct score taken as a threshold, precision/recall are
/// recomputed from scratch over the detections at or above it; the result is
/// the exact integral of the upper precision envelope over recall.
pub fn ap_sweep_ref(outcomes: &[(f64, bool)], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return f64::NAN;
    }
    let mut thresholds: Vec<f64> = outcomes.iter().map(|&(s, _)| s).collect();
    thresholds.sort_by(|p, q| p.partial_cmp(q).unwrap());
    thresholds.dedup();

    // One (recall, precision) point per distinct threshold.
    let mut points: Vec<(f64, f64)> = Vec::new();
    for &tau in &thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for &(s, hit) in outcomes {
            if s >= tau {
                if hit {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        if tp + fp == 0 {
            continue;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / num_gt as f64;
        points.push((recall, precision));
    }

    // Integrate max{p_i : r_i >= r} over r in (0, 1], piecewise constant
    // between the achieved recall values.
    let mut recalls: Vec<f64> = points.iter().map(|&(r, _)| r).collect();
    recalls.sort_by(|p, q| p.partial_cmp(q).unwrap());
    recalls.dedup();
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for &r in &recalls {
        if r == 0.0 {
            continue;
        }
        let p_env = points
            .iter()
            .filter(|&&(ri, _)| ri >= r)
            .map(|&(_, pi)| pi)
            .fold(0.0_f64, f64::max);
        ap += (r - prev_r) * p_env;
        prev_r = r;
    }
    ap
}

// ---------------------------------------------------------------------------
// Deterministic pseudo-random stream for oracle-side sampling
// ---------------------------------------------------------------------------

/// Tiny splitmix64 generator so oracle tests can draw reproducible samples
/// without depending on the crate's RNG choices.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
