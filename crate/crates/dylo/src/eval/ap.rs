//! Average precision: the exact area under the upper precision envelope
//! as a function of recall.

/// One detection's contribution to a precision/recall curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrSample {
    pub score: f64,
    pub tp: bool,
}

/// All-points-interpolated average precision for one class.
///
/// Samples are ranked by descending score. Equal scores form one
/// operating point (no threshold can separate them), so tied samples are
/// folded into a single precision/recall pair. The curve's upper envelope
/// (max precision at recall >= r) is then integrated exactly over the
/// achieved recall values. Returns `None` when the class has no ground
/// truth, in which case precision is undefined at every recall.
pub fn average_precision(samples: &[PrSample], num_gt: usize) -> Option<f64> {
    if num_gt == 0 {
        return None;
    }
    let mut sorted: Vec<PrSample> = samples.to_vec();
    sorted.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());

    // One (recall, precision) point per distinct score, cumulative from
    // the top; recall is non-decreasing along the list.
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    for (i, s) in sorted.iter().enumerate() {
        if s.tp {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = i + 1 == sorted.len() || sorted[i + 1].score != s.score;
        if last_of_group {
            points.push((tp as f64 / num_gt as f64, tp as f64 / (tp + fp) as f64));
        }
    }

    // Suffix-max precision, so each point carries the envelope value.
    let mut envelope = vec![0.0; points.len()];
    let mut running = 0.0f64;
    for i in (0..points.len()).rev() {
        running = running.max(points[i].1);
        envelope[i] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (i, &(recall, _)) in points.iter().enumerate() {
        ap += (recall - prev_recall) * envelope[i];
        prev_recall = recall;
    }
    Some(ap)
}

/// Mean of the defined per-class APs; `None` when every class is skipped.
pub fn mean_average_precision(per_class: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = per_class.iter().filter_map(|a| *a).collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}
