//! Class-aware non-maximum suppression.

use crate::boxes::{iou, DetBox};

/// Detections scoring below this are dropped before suppression.
pub const DEFAULT_CONF_THRESHOLD: f64 = 0.25;

/// A kept box suppresses same-class boxes overlapping beyond this IoU.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.45;

/// Greedy suppression: drop detections below `conf_threshold`, walk the
/// rest from highest score down, and keep a box only if it overlaps every
/// already-kept box of the same class by at most `iou_threshold`. Ties in
/// score break toward the lower class id, then earlier input position, so
/// the result is a pure function of the input. Output stays in descending
/// score order, and running the function on its own output returns it
/// unchanged.
pub fn nms(dets: &[DetBox], conf_threshold: f64, iou_threshold: f64) -> Vec<DetBox> {
    let mut order: Vec<usize> = (0..dets.len())
        .filter(|&i| dets[i].score >= conf_threshold)
        .collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap()
            .then(dets[a].class_id.cmp(&dets[b].class_id))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<DetBox> = Vec::new();
    for &i in &order {
        let d = &dets[i];
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == d.class_id && iou(k, d) > iou_threshold);
        if !suppressed {
            kept.push(*d);
        }
    }
    kept
}
