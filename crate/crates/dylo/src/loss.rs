//! Training loss: overlap-based localization, weighted binary confidence,
//! and per-class binary classification, combined with fixed weights.
//!
//! Every term is assembled from recorded tensor ops, so one backward pass
//! through the returned total yields gradients for the whole network.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::nn::{PredGrid, SIZE_LOGIT_BOUND};
use crate::target::Assignment;
use crate::tensor::{Scalar, Tape, Tensor};

/// Relative weights of the three loss terms plus the down-weight applied
/// to confidence errors at cells with no object.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub localization: f64,
    pub confidence: f64,
    pub classification: f64,
    pub negative_confidence: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            localization: 5.0,
            confidence: 1.0,
            classification: 1.0,
            negative_confidence: 0.5,
        }
    }
}

/// The combined loss (kept on the tape) plus the already-evaluated values
/// of its parts for logging.
#[derive(Debug)]
pub struct LossReport<T: Scalar> {
    pub total: Tensor<T>,
    pub localization: f64,
    pub confidence: f64,
    pub classification: f64,
    pub positives: usize,
}

fn constant<T: Scalar>(vals: Vec<f64>) -> Tensor<T> {
    let shape = vec![vals.len()];
    let data = vals.into_iter().map(T::from_f64).collect();
    Tensor::new(data, &shape).expect("constant shape matches data")
}

fn acc<T: Scalar>(tape: &mut Tape<T>, sum: Option<Tensor<T>>, term: Tensor<T>) -> Option<Tensor<T>> {
    Some(match sum {
        Some(s) => tape.add(&s, &term).expect("scalar accumulation"),
        None => term,
    })
}

/// Compute the full training loss for a batch of prediction grids against
/// per-image cell assignments.
///
/// Localization averages (1 - overlap ratio) between decoded positive-cell
/// boxes and their targets over all positives; confidence scores every
/// cell's objectness with binary cross-entropy, negatives down-weighted,
/// normalized by the total cell count; classification scores per-class
/// binary cross-entropy at positive cells, normalized by positives times
/// classes.
pub fn total_loss<T: Scalar>(
    tape: &mut Tape<T>,
    preds: &[PredGrid<T>; 3],
    batch: &[Assignment],
    weights: &LossWeights,
) -> Result<LossReport<T>> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::Shape("loss needs at least one image".into()));
    }
    let ch = {
        let shape = preds[0].tensor.shape();
        if shape.len() != 4 {
            return Err(Error::Shape(format!(
                "prediction grids must be 4-d, got {shape:?}"
            )));
        }
        shape[1]
    };
    if ch < 6 {
        return Err(Error::Shape(format!(
            "prediction grids need at least 6 channels, got {ch}"
        )));
    }
    let num_classes = ch - 5;

    let mut loc_sum: Option<Tensor<T>> = None;
    let mut conf_sum: Option<Tensor<T>> = None;
    let mut cls_sum: Option<Tensor<T>> = None;
    let mut positives = 0usize;
    let mut cells_total = 0usize;

    for pg in preds {
        let shape = pg.tensor.shape().to_vec();
        if shape != [n, ch, pg.grid, pg.grid] {
            return Err(Error::Shape(format!(
                "stride-{} grid has shape {:?}, expected {:?}",
                pg.stride,
                shape,
                [n, ch, pg.grid, pg.grid]
            )));
        }
        let g = pg.grid;
        let hw = g * g;
        let stride = pg.stride as f64;

        let mut idx_obj = Vec::with_capacity(n * hw);
        let mut t_obj = Vec::with_capacity(n * hw);
        let mut w_obj = Vec::with_capacity(n * hw);
        let mut idx_box = [vec![], vec![], vec![], vec![]];
        let mut cols = Vec::new();
        let mut rows = Vec::new();
        let mut tgt = Vec::new();
        let mut idx_cls = Vec::new();
        let mut t_cls = Vec::new();

        for (ni, a) in batch.iter().enumerate() {
            let map = &a.maps[if pg.stride == 8 { 0 } else if pg.stride == 16 { 1 } else { 2 }];
            if map.grid != g || map.stride != pg.stride {
                return Err(Error::Shape(format!(
                    "assignment grid {}x{} at stride {} does not match predictions ({}x{} at stride {})",
                    map.grid, map.grid, map.stride, g, g, pg.stride
                )));
            }
            for cell in 0..hw {
                idx_obj.push((ni * ch + 4) * hw + cell);
                match &map.cells[cell] {
                    Some(b) => {
                        t_obj.push(1.0);
                        w_obj.push(1.0);
                        if b.class_id >= num_classes {
                            return Err(Error::Data(format!(
                                "assigned class {} exceeds the {} predicted classes",
                                b.class_id, num_classes
                            )));
                        }
                        for (c, idx) in idx_box.iter_mut().enumerate() {
                            idx.push((ni * ch + c) * hw + cell);
                        }
                        cols.push((cell % g) as f64);
                        rows.push((cell / g) as f64);
                        tgt.push(b.clone());
                        for c in 0..num_classes {
                            idx_cls.push((ni * ch + 5 + c) * hw + cell);
                            t_cls.push(if c == b.class_id { 1.0 } else { 0.0 });
                        }
                    }
                    None => {
                        t_obj.push(0.0);
                        w_obj.push(weights.negative_confidence);
                    }
                }
            }
        }

        // Confidence: weighted binary cross-entropy at every cell.
        let gathered = tape.gather(&pg.tensor, Rc::new(idx_obj))?;
        let p = tape.sigmoid(&gathered)?;
        let b = tape.bce(&p, &constant(t_obj))?;
        let wb = tape.mul(&b, &constant(w_obj))?;
        let s = tape.sum(&wb)?;
        conf_sum = acc(tape, conf_sum, s);
        cells_total += n * hw;

        let p_here = tgt.len();
        if p_here == 0 {
            continue;
        }
        positives += p_here;

        // Localization: decode each positive cell in-graph and score the
        // overlap with its target box.
        let bound = T::from_f64(SIZE_LOGIT_BOUND);
        let half = T::from_f64(0.5);
        let sxy = |tape: &mut Tape<T>, idx: Vec<usize>, off: Vec<f64>| -> Result<Tensor<T>> {
            let raw = tape.gather(&pg.tensor, Rc::new(idx))?;
            let sig = tape.sigmoid(&raw)?;
            let shifted = tape.add(&sig, &constant(off))?;
            Ok(tape.mul_scalar(&shifted, T::from_f64(stride)))
        };
        let swh = |tape: &mut Tape<T>, idx: Vec<usize>| -> Result<Tensor<T>> {
            let raw = tape.gather(&pg.tensor, Rc::new(idx))?;
            let clamped = tape.clamp(&raw, -bound, bound)?;
            let e = tape.exp(&clamped)?;
            Ok(tape.mul_scalar(&e, T::from_f64(stride)))
        };
        let [ix, iy, iw, ih] = idx_box;
        let cx = sxy(tape, ix, cols)?;
        let cy = sxy(tape, iy, rows)?;
        let w = swh(tape, iw)?;
        let h = swh(tape, ih)?;

        let half_w = tape.mul_scalar(&w, half);
        let half_h = tape.mul_scalar(&h, half);
        let x1 = tape.sub(&cx, &half_w)?;
        let x2 = tape.add(&cx, &half_w)?;
        let y1 = tape.sub(&cy, &half_h)?;
        let y2 = tape.add(&cy, &half_h)?;

        let tx1 = constant(tgt.iter().map(|b| b.cx - b.w * 0.5).collect());
        let tx2 = constant(tgt.iter().map(|b| b.cx + b.w * 0.5).collect());
        let ty1 = constant(tgt.iter().map(|b| b.cy - b.h * 0.5).collect());
        let ty2 = constant(tgt.iter().map(|b| b.cy + b.h * 0.5).collect());
        let t_area = constant(tgt.iter().map(|b| b.area()).collect());

        let ix1 = tape.maximum(&x1, &tx1)?;
        let ix2 = tape.minimum(&x2, &tx2)?;
        let iy1 = tape.maximum(&y1, &ty1)?;
        let iy2 = tape.minimum(&y2, &ty2)?;
        let zero = Tensor::scalar(T::zero());
        let dw = tape.sub(&ix2, &ix1)?;
        let dh = tape.sub(&iy2, &iy1)?;
        let cw = tape.maximum(&dw, &zero)?;
        let chh = tape.maximum(&dh, &zero)?;
        let inter = tape.mul(&cw, &chh)?;
        let p_area = tape.mul(&w, &h)?;
        let joint = tape.add(&p_area, &t_area)?;
        let union = tape.sub(&joint, &inter)?;
        let iou = tape.div(&inter, &union)?;
        let one = Tensor::scalar(T::one());
        let short = tape.sub(&one, &iou)?;
        let s = tape.sum(&short)?;
        loc_sum = acc(tape, loc_sum, s);

        // Classification: per-class binary cross-entropy at positives.
        let gathered = tape.gather(&pg.tensor, Rc::new(idx_cls))?;
        let p = tape.sigmoid(&gathered)?;
        let b = tape.bce(&p, &constant(t_cls))?;
        let s = tape.sum(&b)?;
        cls_sum = acc(tape, cls_sum, s);
    }

    let conf_sum = conf_sum.expect("three scales always contribute confidence");
    let conf = tape.mul_scalar(&conf_sum, T::from_f64(1.0 / cells_total as f64));
    let (loc, cls) = if positives > 0 {
        let l = tape.mul_scalar(&loc_sum.unwrap(), T::from_f64(1.0 / positives as f64));
        let c = tape.mul_scalar(
            &cls_sum.unwrap(),
            T::from_f64(1.0 / (positives * num_classes) as f64),
        );
        (l, c)
    } else {
        (Tensor::scalar(T::zero()), Tensor::scalar(T::zero()))
    };

    let wl = tape.mul_scalar(&loc, T::from_f64(weights.localization));
    let wc = tape.mul_scalar(&conf, T::from_f64(weights.confidence));
    let wk = tape.mul_scalar(&cls, T::from_f64(weights.classification));
    let lc = tape.add(&wl, &wc)?;
    let total = tape.add(&lc, &wk)?;

    Ok(LossReport {
        total,
        localization: loc.item().to_f64(),
        confidence: conf.item().to_f64(),
        classification: cls.item().to_f64(),
        positives,
    })
}
