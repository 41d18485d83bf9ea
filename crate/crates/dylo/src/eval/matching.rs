//! Greedy detection-to-truth matching within one image.

use crate::boxes::{iou, DetBox};

/// Minimum IoU for a detection to claim a ground-truth box.
pub const MATCH_IOU: f64 = 0.5;

/// Match detections against ground truth, one claim per truth box:
/// detections are visited in descending score order (earlier input
/// position on ties) and each claims the unclaimed same-class truth box
/// with the highest IoU at or above `iou_threshold` (lowest index on
/// exact IoU ties). Returns a true-positive flag per detection, aligned
/// with the input order.
pub fn match_detections(dets: &[DetBox], gts: &[DetBox], iou_threshold: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut claimed = vec![false; gts.len()];
    let mut tp = vec![false; dets.len()];
    for &di in &order {
        let d = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if claimed[gi] || g.class_id != d.class_id {
                continue;
            }
            let v = iou(d, g);
            if v >= iou_threshold && best.map_or(true, |(_, bv)| v > bv) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, _)) = best {
            claimed[gi] = true;
            tp[di] = true;
        }
    }
    tp
}
