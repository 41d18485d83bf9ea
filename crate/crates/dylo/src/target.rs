//! Grid target assignment: which cell of which scale is responsible for
//! each ground-truth box during training.

use crate::boxes::DetBox;
use crate::error::{Error, Result};
use crate::nn::{ModelConfig, STRIDES};

/// Fraction of the input edge separating the shallow/middle scale bands.
const BAND_LO: f64 = 0.4;
/// Fraction of the input edge separating the middle/deep scale bands.
const BAND_HI: f64 = 0.8;

/// A ground-truth box bound to one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub class_id: usize,
}

impl AssignedBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Per-scale assignment grid. `cells[row * grid + col]` holds the box the
/// cell is responsible for, if any; a cell is "positive" exactly when it
/// holds a box (objectness target 1, else 0).
#[derive(Clone, Debug)]
pub struct TargetMap {
    pub stride: usize,
    pub grid: usize,
    pub cells: Vec<Option<AssignedBox>>,
}

impl TargetMap {
    fn new(stride: usize, grid: usize) -> Self {
        TargetMap {
            stride,
            grid,
            cells: vec![None; grid * grid],
        }
    }

    pub fn num_positive(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn objectness_target(&self, cell: usize) -> f64 {
        if self.cells[cell].is_some() {
            1.0
        } else {
            0.0
        }
    }
}

/// Assignment of one image's ground truth onto the three scale grids.
#[derive(Clone, Debug)]
pub struct Assignment {
    pub maps: [TargetMap; 3],
    /// Boxes that could not be placed (their grid was full).
    pub warnings: Vec<String>,
}

impl Assignment {
    pub fn num_positive(&self) -> usize {
        self.maps.iter().map(|m| m.num_positive()).sum()
    }
}

/// Scale band for a box: by its larger side, the shallow grid takes
/// (0, 0.4*S], the middle (0.4*S, 0.8*S], the deep everything larger.
pub fn scale_for_box(w: f64, h: f64, input_size: usize) -> usize {
    let m = w.max(h);
    let s = input_size as f64;
    if m <= BAND_LO * s {
        0
    } else if m <= BAND_HI * s {
        1
    } else {
        2
    }
}

/// Map each ground-truth box to its scale band and center cell.
///
/// When two boxes land on the same cell the larger area wins and the
/// smaller is moved to the nearest free cell of the same grid (squared
/// center distance, row-major on ties); if the whole grid is occupied the
/// box is dropped and reported in `warnings`. Class ids must fit the
/// configured class count, and geometry must lie inside the input square.
pub fn assign_targets(gts: &[DetBox], cfg: &ModelConfig) -> Result<Assignment> {
    let s = cfg.input_size as f64;
    let grids = cfg.grid_sizes();
    let mut maps = [
        TargetMap::new(STRIDES[0], grids[0]),
        TargetMap::new(STRIDES[1], grids[1]),
        TargetMap::new(STRIDES[2], grids[2]),
    ];
    let mut warnings = Vec::new();

    for (i, gt) in gts.iter().enumerate() {
        if gt.w <= 0.0 || gt.h <= 0.0 {
            return Err(Error::Data(format!(
                "ground-truth box {i} has non-positive size {}x{}",
                gt.w, gt.h
            )));
        }
        if gt.cx < 0.0 || gt.cx > s || gt.cy < 0.0 || gt.cy > s {
            return Err(Error::Data(format!(
                "ground-truth box {i} center ({}, {}) outside the {s}px input square",
                gt.cx, gt.cy
            )));
        }
        if gt.class_id >= cfg.num_classes {
            return Err(Error::Data(format!(
                "ground-truth box {i} has class {} but the model knows {} classes",
                gt.class_id, cfg.num_classes
            )));
        }
    }

    // Larger boxes claim cells first so that on a collision the smaller
    // box is the one relocated. Equal areas keep input order.
    let mut order: Vec<usize> = (0..gts.len()).collect();
    order.sort_by(|&a, &b| {
        let aa = gts[a].w * gts[a].h;
        let ab = gts[b].w * gts[b].h;
        ab.partial_cmp(&aa).unwrap().then(a.cmp(&b))
    });

    for &gi in &order {
        let gt = &gts[gi];
        let scale = scale_for_box(gt.w, gt.h, cfg.input_size);
        let map = &mut maps[scale];
        let stride = map.stride as f64;
        let grid = map.grid;
        let col = ((gt.cx / stride) as usize).min(grid - 1);
        let row = ((gt.cy / stride) as usize).min(grid - 1);
        let assigned = AssignedBox {
            cx: gt.cx,
            cy: gt.cy,
            w: gt.w,
            h: gt.h,
            class_id: gt.class_id,
        };

        let home = row * grid + col;
        if map.cells[home].is_none() {
            map.cells[home] = Some(assigned);
            continue;
        }

        // Nearest free cell by squared distance between the cell center
        // and the box center measured in cell units; row-major on ties.
        let fx = gt.cx / stride;
        let fy = gt.cy / stride;
        let mut best: Option<(f64, usize)> = None;
        for r in 0..grid {
            for c in 0..grid {
                let cell = r * grid + c;
                if map.cells[cell].is_some() {
                    continue;
                }
                let dx = c as f64 + 0.5 - fx;
                let dy = r as f64 + 0.5 - fy;
                let d2 = dx * dx + dy * dy;
                if best.map_or(true, |(bd, _)| d2 < bd) {
                    best = Some((d2, cell));
                }
            }
        }
        match best {
            Some((_, cell)) => map.cells[cell] = Some(assigned),
            None => warnings.push(format!(
                "dropped box {gi} (class {}, center {:.1},{:.1}): stride-{} grid is full",
                gt.class_id, gt.cx, gt.cy, map.stride
            )),
        }
    }

    Ok(Assignment { maps, warnings })
}
