//! Conversion between raw head outputs and pixel-space boxes.
//!
//! A cell (row i, col j) of a stride-s grid predicts
//!
//! ```text
//! cx = (j + sigmoid(tx)) * s        w = exp(clamp(tw, ±8)) * s
//! cy = (i + sigmoid(ty)) * s        h = exp(clamp(th, ±8)) * s
//! ```
//!
//! so the center always falls inside the cell and sizes stay positive and
//! bounded. Confidence is sigmoid(objectness) times the best per-class
//! sigmoid score; the class is the argmax (lowest id on ties).

use super::model::PredGrid;
use crate::boxes::DetBox;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Clamp bound for size logits before exponentiation.
pub const SIZE_LOGIT_BOUND: f64 = 8.0;

/// Floor/ceiling for in-cell offsets during encoding, keeping the logit
/// finite when a center sits exactly on a cell edge.
pub const OFFSET_EPS: f64 = 1e-6;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Raw cell values -> pixel-space geometry.
pub fn decode_cell(t: [f64; 4], row: usize, col: usize, stride: usize) -> (f64, f64, f64, f64) {
    let s = stride as f64;
    let cx = (col as f64 + sigmoid(t[0])) * s;
    let cy = (row as f64 + sigmoid(t[1])) * s;
    let w = t[2].clamp(-SIZE_LOGIT_BOUND, SIZE_LOGIT_BOUND).exp() * s;
    let h = t[3].clamp(-SIZE_LOGIT_BOUND, SIZE_LOGIT_BOUND).exp() * s;
    (cx, cy, w, h)
}

/// Pixel-space geometry -> raw cell values for the cell at (row, col).
/// Offsets are clamped to (0, 1) before the logit; sizes must be positive.
pub fn encode_cell(
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    row: usize,
    col: usize,
    stride: usize,
) -> Result<[f64; 4]> {
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::Data(format!(
            "cannot encode a box with non-positive size {w}x{h}"
        )));
    }
    let s = stride as f64;
    let ox = (cx / s - col as f64).clamp(OFFSET_EPS, 1.0 - OFFSET_EPS);
    let oy = (cy / s - row as f64).clamp(OFFSET_EPS, 1.0 - OFFSET_EPS);
    Ok([logit(ox), logit(oy), (w / s).ln(), (h / s).ln()])
}

/// Decode one model output (batch of one) into scored boxes, keeping
/// those whose confidence reaches `conf_thresh`.
pub fn decode<T: Scalar>(grids: &[PredGrid<T>], conf_thresh: f64) -> Result<Vec<DetBox>> {
    let mut out = Vec::new();
    for g in grids {
        let shape = g.tensor.shape();
        if shape.len() != 4 || shape[0] != 1 {
            return Err(Error::Shape(format!(
                "decode expects a single-image grid [1, ch, g, g], got {shape:?}"
            )));
        }
        let ch = shape[1];
        if ch < 6 {
            return Err(Error::Shape(format!(
                "prediction grid needs at least 6 channels, got {ch}"
            )));
        }
        let num_classes = ch - 5;
        let gsize = g.grid;
        if shape[2] != gsize || shape[3] != gsize {
            return Err(Error::Shape(format!(
                "grid tensor is {}x{}, expected {gsize}x{gsize}",
                shape[2], shape[3]
            )));
        }
        let data = g.tensor.to_vec();
        let hw = gsize * gsize;
        let plane = |c: usize, cell: usize| data[c * hw + cell].to_f64();
        for row in 0..gsize {
            for col in 0..gsize {
                let cell = row * gsize + col;
                let obj = sigmoid(plane(4, cell));
                let mut best_class = 0usize;
                let mut best_p = f64::NEG_INFINITY;
                for c in 0..num_classes {
                    let p = sigmoid(plane(5 + c, cell));
                    if p > best_p {
                        best_p = p;
                        best_class = c;
                    }
                }
                let conf = obj * best_p;
                if conf < conf_thresh {
                    continue;
                }
                let t = [plane(0, cell), plane(1, cell), plane(2, cell), plane(3, cell)];
                let (cx, cy, w, h) = decode_cell(t, row, col, g.stride);
                out.push(DetBox::new(cx, cy, w, h, conf, best_class));
            }
        }
    }
    Ok(out)
}
