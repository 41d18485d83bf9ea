//! Axis-aligned detection boxes and intersection-over-union.

use serde::{Deserialize, Serialize};

/// A detection or ground-truth box in pixel coordinates, center form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// Confidence in [0, 1]; ground-truth boxes carry 1.0.
    pub score: f64,
    pub class_id: usize,
}

impl DetBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, score: f64, class_id: usize) -> Self {
        DetBox {
            cx,
            cy,
            w,
            h,
            score,
            class_id,
        }
    }

    pub fn x1(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn y1(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn x2(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn y2(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64, score: f64, class_id: usize) -> Self {
        DetBox {
            cx: (x1 + x2) / 2.0,
            cy: (y1 + y2) / 2.0,
            w: x2 - x1,
            h: y2 - y1,
            score,
            class_id,
        }
    }
}

/// Intersection over union of two boxes: |A ∩ B| / |A ∪ B|, in [0, 1].
/// Degenerate boxes (non-positive extent) contribute zero area; if the
/// union is empty the result is 0.
pub fn iou(a: &DetBox, b: &DetBox) -> f64 {
    let ix = (a.x2().min(b.x2()) - a.x1().max(b.x1())).max(0.0);
    let iy = (a.y2().min(b.y2()) - a.y1().max(b.y1())).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}
