//! Detection quality report: per-class counts, precision/recall/F1, and
//! mean average precision, rendered as a text table or JSON.

use serde::Serialize;

use crate::boxes::DetBox;
use crate::error::{Error, Result};
use crate::eval::ap::{average_precision, mean_average_precision, PrSample};
use crate::eval::matching::match_detections;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassRow {
    pub name: String,
    pub ground_truths: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent for classes with no ground truth.
    pub average_precision: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub classes: Vec<ClassRow>,
    /// Counts pooled over classes before computing precision/recall/F1.
    pub micro: MicroMetrics,
    /// Mean AP over classes that have ground truth; 0 if none do.
    pub mean_average_precision: f64,
    /// Classes excluded from the mean because they have no ground truth.
    pub skipped_classes: Vec<String>,
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    safe_div(2.0 * precision * recall, precision + recall)
}

/// Score detections against ground truth over a set of images. Each
/// element of `images` pairs one image's final detections with its truth
/// boxes; matching is greedy per image at `iou_threshold`.
pub fn evaluate(
    images: &[(Vec<DetBox>, Vec<DetBox>)],
    class_names: &[String],
    iou_threshold: f64,
) -> Result<EvalReport> {
    let nc = class_names.len();
    if nc == 0 {
        return Err(Error::Config("evaluation needs at least one class".into()));
    }
    let mut samples: Vec<Vec<PrSample>> = vec![Vec::new(); nc];
    let mut gt_count = vec![0usize; nc];
    let mut tp_count = vec![0usize; nc];
    let mut fp_count = vec![0usize; nc];
    for (img_idx, (dets, gts)) in images.iter().enumerate() {
        for b in dets.iter().chain(gts.iter()) {
            if b.class_id >= nc {
                return Err(Error::Data(format!(
                    "image {img_idx} carries class id {} but only {nc} classes are named",
                    b.class_id
                )));
            }
        }
        for g in gts {
            gt_count[g.class_id] += 1;
        }
        let flags = match_detections(dets, gts, iou_threshold);
        for (d, &hit) in dets.iter().zip(&flags) {
            samples[d.class_id].push(PrSample {
                score: d.score,
                tp: hit,
            });
            if hit {
                tp_count[d.class_id] += 1;
            } else {
                fp_count[d.class_id] += 1;
            }
        }
    }

    let mut classes = Vec::with_capacity(nc);
    let mut per_class_ap = Vec::with_capacity(nc);
    let mut skipped = Vec::new();
    for c in 0..nc {
        let ap = average_precision(&samples[c], gt_count[c]);
        if ap.is_none() {
            skipped.push(class_names[c].clone());
        }
        per_class_ap.push(ap);
        let precision = safe_div(tp_count[c] as f64, (tp_count[c] + fp_count[c]) as f64);
        let recall = safe_div(tp_count[c] as f64, gt_count[c] as f64);
        classes.push(ClassRow {
            name: class_names[c].clone(),
            ground_truths: gt_count[c],
            true_positives: tp_count[c],
            false_positives: fp_count[c],
            false_negatives: gt_count[c] - tp_count[c],
            precision,
            recall,
            f1: f1_of(precision, recall),
            average_precision: ap,
        });
    }

    let tp: usize = tp_count.iter().sum();
    let fp: usize = fp_count.iter().sum();
    let fn_total: usize = classes.iter().map(|r| r.false_negatives).sum();
    let precision = safe_div(tp as f64, (tp + fp) as f64);
    let recall = safe_div(tp as f64, (tp + fn_total) as f64);
    Ok(EvalReport {
        classes,
        micro: MicroMetrics {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_total,
            precision,
            recall,
            f1: f1_of(precision, recall),
        },
        mean_average_precision: mean_average_precision(&per_class_ap).unwrap_or(0.0),
        skipped_classes: skipped,
    })
}

/// Round to four decimal places; both output formats use this so their
/// numbers agree digit for digit.
fn round4(v: f64) -> f64 {
    (v * 10000.0).round() / 10000.0
}

impl EvalReport {
    /// Copy with every ratio rounded to four decimals.
    fn rounded(&self) -> EvalReport {
        let mut out = self.clone();
        for r in &mut out.classes {
            r.precision = round4(r.precision);
            r.recall = round4(r.recall);
            r.f1 = round4(r.f1);
            r.average_precision = r.average_precision.map(round4);
        }
        out.micro.precision = round4(out.micro.precision);
        out.micro.recall = round4(out.micro.recall);
        out.micro.f1 = round4(out.micro.f1);
        out.mean_average_precision = round4(out.mean_average_precision);
        out
    }

    /// Fixed-width text table with one row per class plus a pooled row.
    pub fn render_table(&self) -> String {
        let r = self.rounded();
        let name_w = r
            .classes
            .iter()
            .map(|c| c.name.len())
            .chain(["class".len(), "micro".len()])
            .max()
            .unwrap();
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_w$} {:>6} {:>6} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10}\n",
            "class", "gt", "tp", "fp", "fn", "precision", "recall", "f1", "ap"
        ));
        out.push_str(&"-".repeat(name_w + 4 * 7 + 4 * 11));
        out.push('\n');
        for c in &r.classes {
            let ap = match c.average_precision {
                Some(v) => format!("{v:.4}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<name_w$} {:>6} {:>6} {:>6} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>10}\n",
                c.name,
                c.ground_truths,
                c.true_positives,
                c.false_positives,
                c.false_negatives,
                c.precision,
                c.recall,
                c.f1,
                ap
            ));
        }
        out.push_str(&format!(
            "{:<name_w$} {:>6} {:>6} {:>6} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>10}\n",
            "micro",
            r.micro.true_positives + r.micro.false_negatives,
            r.micro.true_positives,
            r.micro.false_positives,
            r.micro.false_negatives,
            r.micro.precision,
            r.micro.recall,
            r.micro.f1,
            "-"
        ));
        let scored = r.classes.len() - r.skipped_classes.len();
        out.push_str(&format!(
            "mAP {:.4} over {scored} of {} classes",
            r.mean_average_precision,
            r.classes.len()
        ));
        if !r.skipped_classes.is_empty() {
            out.push_str(&format!(
                " (no ground truth for: {})",
                r.skipped_classes.join(", ")
            ));
        }
        out.push('\n');
        out
    }

    /// JSON rendering carrying the same four-decimal values as the table.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rounded()).expect("report serialization cannot fail")
    }
}
