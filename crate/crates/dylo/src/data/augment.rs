//! Training-time augmentation: mirrored/rotated/scaled/shifted geometry,
//! random cropping, and photometric jitter, with box bookkeeping.
//!
//! Geometry is composed into one affine map applied with nearest-neighbor
//! sampling (margins filled neutral gray); boxes travel through the same
//! map as corner hulls. Every random parameter is drawn from a stream
//! seeded by (run seed, epoch, sample index), so a sample's augmentation
//! is reproducible in isolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::annotation::Annotation;
use crate::data::preprocess::PAD_FILL;
use crate::data::raster::Image;

/// Boxes thinner than this many pixels after augmentation are discarded.
pub const MIN_BOX_PX: f64 = 2.0;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub hflip_prob: f64,
    /// Maximum absolute rotation, degrees (drawn symmetrically).
    pub max_rotate_deg: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
    /// Maximum shift as a fraction of each image edge.
    pub max_translate_frac: f64,
    /// Maximum relative brightness change.
    pub max_brightness: f64,
    /// Maximum relative contrast change.
    pub max_contrast: f64,
    pub crop_prob: f64,
    /// Smallest crop window as a fraction of each edge.
    pub crop_min_frac: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            hflip_prob: 0.5,
            max_rotate_deg: 15.0,
            scale_lo: 0.8,
            scale_hi: 1.2,
            max_translate_frac: 0.1,
            max_brightness: 0.2,
            max_contrast: 0.2,
            crop_prob: 0.3,
            crop_min_frac: 0.6,
        }
    }
}

impl AugmentConfig {
    /// A configuration that never alters the sample.
    pub fn identity() -> Self {
        AugmentConfig {
            hflip_prob: 0.0,
            max_rotate_deg: 0.0,
            scale_lo: 1.0,
            scale_hi: 1.0,
            max_translate_frac: 0.0,
            max_brightness: 0.0,
            max_contrast: 0.0,
            crop_prob: 0.0,
            crop_min_frac: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Augmented {
    pub image: Image,
    pub annotations: Vec<Annotation>,
    /// Boxes lost to clipping, the crop window, or the minimum-size rule.
    pub dropped: usize,
}

/// Independent random stream for one sample of one epoch of one run.
pub fn sample_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    // Distinct (seed, epoch, index) triples land on distinct streams.
    let mix = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((epoch as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add((index as u64).wrapping_mul(0x94D0_49BB_1331_11EB));
    ChaCha8Rng::seed_from_u64(mix)
}

type Mat = [[f64; 3]; 3];

fn mat_identity() -> Mat {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_apply(m: &Mat, x: f64, y: f64) -> (f64, f64) {
    (
        m[0][0] * x + m[0][1] * y + m[0][2],
        m[1][0] * x + m[1][1] * y + m[1][2],
    )
}

/// Inverse of an affine map (bottom row 0 0 1).
fn mat_invert(m: &Mat) -> Mat {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let ia = m[1][1] / det;
    let ib = -m[0][1] / det;
    let ic = -m[1][0] / det;
    let id = m[0][0] / det;
    [
        [ia, ib, -(ia * m[0][2] + ib * m[1][2])],
        [ic, id, -(ic * m[0][2] + id * m[1][2])],
        [0.0, 0.0, 1.0],
    ]
}

struct Draws {
    flip: bool,
    angle_deg: f64,
    scale: f64,
    dx: f64,
    dy: f64,
    crop: Option<(usize, usize, usize, usize)>, // x0, y0, w, h
    brightness: f64,
    contrast: f64,
}

/// All random decisions for one sample, drawn in a fixed order so the
/// stream is identical no matter which operations end up active.
fn draw(cfg: &AugmentConfig, rng: &mut ChaCha8Rng, w: usize, h: usize) -> Draws {
    let unit = |rng: &mut ChaCha8Rng| rng.gen::<f64>();
    let symmetric = |u: f64, max: f64| (u * 2.0 - 1.0) * max;

    let flip = unit(rng) < cfg.hflip_prob;
    let angle_deg = symmetric(unit(rng), cfg.max_rotate_deg);
    let scale = cfg.scale_lo + unit(rng) * (cfg.scale_hi - cfg.scale_lo);
    let dx = symmetric(unit(rng), cfg.max_translate_frac) * w as f64;
    let dy = symmetric(unit(rng), cfg.max_translate_frac) * h as f64;

    let do_crop = unit(rng) < cfg.crop_prob;
    let wu = unit(rng);
    let hu = unit(rng);
    let xu = unit(rng);
    let yu = unit(rng);
    let crop = if do_crop {
        let frac = |u: f64| cfg.crop_min_frac + u * (1.0 - cfg.crop_min_frac);
        let cw = ((w as f64 * frac(wu)).round() as usize).clamp(1, w);
        let chh = ((h as f64 * frac(hu)).round() as usize).clamp(1, h);
        let x0 = ((xu * (w - cw + 1) as f64).floor() as usize).min(w - cw);
        let y0 = ((yu * (h - chh + 1) as f64).floor() as usize).min(h - chh);
        Some((x0, y0, cw, chh))
    } else {
        None
    };

    let brightness = 1.0 + symmetric(unit(rng), cfg.max_brightness);
    let contrast = 1.0 + symmetric(unit(rng), cfg.max_contrast);
    Draws {
        flip,
        angle_deg,
        scale,
        dx,
        dy,
        crop,
        brightness,
        contrast,
    }
}

/// Source -> output pixel map for the drawn flip/rotation/scale/shift,
/// all centered on the canvas.
fn build_affine(d: &Draws, w: usize, h: usize) -> Mat {
    let cx = w as f64 / 2.0;
    let cy = h as f64 / 2.0;
    let to_origin: Mat = [[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]];
    let back: Mat = [[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]];
    let mut m = mat_identity();
    if d.flip {
        let f: Mat = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        m = mat_mul(&f, &m);
    }
    let th = d.angle_deg.to_radians();
    if th != 0.0 {
        let r: Mat = [
            [th.cos(), -th.sin(), 0.0],
            [th.sin(), th.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ];
        m = mat_mul(&r, &m);
    }
    if d.scale != 1.0 {
        let s: Mat = [[d.scale, 0.0, 0.0], [0.0, d.scale, 0.0], [0.0, 0.0, 1.0]];
        m = mat_mul(&s, &m);
    }
    let centered = mat_mul(&back, &mat_mul(&m, &to_origin));
    let t: Mat = [[1.0, 0.0, d.dx], [0.0, 1.0, d.dy], [0.0, 0.0, 1.0]];
    mat_mul(&t, &centered)
}

fn is_identity_affine(d: &Draws) -> bool {
    !d.flip && d.angle_deg == 0.0 && d.scale == 1.0 && d.dx == 0.0 && d.dy == 0.0
}

/// Corner hull of a pixel-space box through the map, as (x1, y1, x2, y2).
fn map_box_hull(m: &Mat, x1: f64, y1: f64, x2: f64, y2: f64) -> (f64, f64, f64, f64) {
    let corners = [(x1, y1), (x2, y1), (x1, y2), (x2, y2)];
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in corners {
        let (u, v) = mat_apply(m, x, y);
        lo.0 = lo.0.min(u);
        lo.1 = lo.1.min(v);
        hi.0 = hi.0.max(u);
        hi.1 = hi.1.max(v);
    }
    (lo.0, lo.1, hi.0, hi.1)
}

pub fn augment(
    img: &Image,
    anns: &[Annotation],
    cfg: &AugmentConfig,
    rng: &mut ChaCha8Rng,
) -> Augmented {
    let (w, h) = (img.width, img.height);
    let d = draw(cfg, rng, w, h);
    let mut dropped = 0usize;

    // Geometry, one warp for the image and a hull map per box.
    let mut image;
    let mut pixel_boxes: Vec<(f64, f64, f64, f64, usize, Option<_>)> = anns
        .iter()
        .map(|a| {
            let bw = a.w * w as f64;
            let bh = a.h * h as f64;
            let x1 = a.cx * w as f64 - bw / 2.0;
            let y1 = a.cy * h as f64 - bh / 2.0;
            (x1, y1, x1 + bw, y1 + bh, a.class_id, a.severity)
        })
        .collect();

    if is_identity_affine(&d) {
        image = img.clone();
    } else {
        let m = build_affine(&d, w, h);
        let inv = mat_invert(&m);
        image = Image::new(w, h, img.channels, PAD_FILL);
        for oy in 0..h {
            for ox in 0..w {
                let (u, v) = mat_apply(&inv, ox as f64 + 0.5, oy as f64 + 0.5);
                let sx = u.floor();
                let sy = v.floor();
                if sx >= 0.0 && sy >= 0.0 && (sx as usize) < w && (sy as usize) < h {
                    for c in 0..img.channels {
                        image.set(ox, oy, c, img.get(sx as usize, sy as usize, c));
                    }
                }
            }
        }
        for b in &mut pixel_boxes {
            let (x1, y1, x2, y2) = map_box_hull(&m, b.0, b.1, b.2, b.3);
            *b = (x1, y1, x2, y2, b.4, b.5);
        }
    }

    // Clip to the canvas; the minimum-size rule prunes slivers.
    let mut kept: Vec<(f64, f64, f64, f64, usize, Option<_>)> = Vec::new();
    for (x1, y1, x2, y2, class_id, sev) in pixel_boxes {
        let cx1 = x1.max(0.0);
        let cy1 = y1.max(0.0);
        let cx2 = x2.min(w as f64);
        let cy2 = y2.min(h as f64);
        if cx2 - cx1 >= MIN_BOX_PX && cy2 - cy1 >= MIN_BOX_PX {
            kept.push((cx1, cy1, cx2, cy2, class_id, sev));
        } else {
            dropped += 1;
        }
    }

    // Crop: keep boxes whose centers stay inside the window.
    let (mut out_w, mut out_h) = (w as f64, h as f64);
    if let Some((x0, y0, cw, chh)) = d.crop {
        let mut cropped = Image::new(cw, chh, image.channels, PAD_FILL);
        for y in 0..chh {
            for x in 0..cw {
                for c in 0..image.channels {
                    cropped.set(x, y, c, image.get(x + x0, y + y0, c));
                }
            }
        }
        image = cropped;
        let (fx0, fy0) = (x0 as f64, y0 as f64);
        let mut inside = Vec::new();
        for (x1, y1, x2, y2, class_id, sev) in kept {
            let cx = (x1 + x2) / 2.0;
            let cy = (y1 + y2) / 2.0;
            let center_in = cx >= fx0 && cx < fx0 + cw as f64 && cy >= fy0 && cy < fy0 + chh as f64;
            if !center_in {
                dropped += 1;
                continue;
            }
            let nx1 = (x1 - fx0).max(0.0);
            let ny1 = (y1 - fy0).max(0.0);
            let nx2 = (x2 - fx0).min(cw as f64);
            let ny2 = (y2 - fy0).min(chh as f64);
            if nx2 - nx1 >= MIN_BOX_PX && ny2 - ny1 >= MIN_BOX_PX {
                inside.push((nx1, ny1, nx2, ny2, class_id, sev));
            } else {
                dropped += 1;
            }
        }
        kept = inside;
        out_w = cw as f64;
        out_h = chh as f64;
    }

    // Photometric jitter on whatever channels the image has.
    if d.brightness != 1.0 || d.contrast != 1.0 {
        for v in image.data.iter_mut() {
            let x = *v as f64 / 255.0;
            let adjusted = (((x - 0.5) * d.contrast) + 0.5) * d.brightness;
            *v = (adjusted.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }

    let annotations = kept
        .into_iter()
        .map(|(x1, y1, x2, y2, class_id, severity)| Annotation {
            class_id,
            cx: ((x1 + x2) / 2.0 / out_w).clamp(0.0, 1.0),
            cy: ((y1 + y2) / 2.0 / out_h).clamp(0.0, 1.0),
            w: ((x2 - x1) / out_w).min(1.0),
            h: ((y2 - y1) / out_h).min(1.0),
            severity,
        })
        .collect();

    Augmented {
        image,
        annotations,
        dropped,
    }
}
