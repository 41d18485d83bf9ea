//! Defect injection: paint one flaw onto a rendered part and report the
//! exact changed-pixel bounding box as the annotation.
//!
//! Every injector draws its random parameters up front in a fixed order
//! and only then applies the severity scale, so the same seed produces
//! geometrically nested flaws across severities (the reported box area
//! never shrinks as severity rises).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::annotation::{Annotation, Severity};
use crate::data::raster::Image;
use crate::error::{Error, Result};
use crate::synth::parts::{background_at, coord_noise, PartKind, PartScene, SceneGeometry};

/// Canonical defect-type order; annotation class ids index into this.
pub const TYPE_NAMES: [&str; 7] = [
    "scratch",
    "crack",
    "wear",
    "broken_tooth",
    "burr",
    "deformation",
    "rust",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DefectType {
    Scratch,
    Crack,
    Wear,
    BrokenTooth,
    Burr,
    Deformation,
    Rust,
}

impl DefectType {
    pub const ALL: [DefectType; 7] = [
        DefectType::Scratch,
        DefectType::Crack,
        DefectType::Wear,
        DefectType::BrokenTooth,
        DefectType::Burr,
        DefectType::Deformation,
        DefectType::Rust,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|d| *d == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        TYPE_NAMES[self.index()]
    }
}

impl fmt::Display for DefectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DefectType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TYPE_NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| DefectType::ALL[i])
            .ok_or_else(|| Error::Config(format!("unknown defect type {s:?}")))
    }
}

/// Which flaws occur on which part.
pub fn defects_for(kind: PartKind) -> [DefectType; 3] {
    match kind {
        PartKind::Bearing => [DefectType::Scratch, DefectType::Crack, DefectType::Wear],
        PartKind::Gear => [DefectType::BrokenTooth, DefectType::Burr, DefectType::Wear],
        PartKind::Bolt => [DefectType::Deformation, DefectType::Crack, DefectType::Rust],
    }
}

/// Extent/contrast multiplier per severity.
pub fn severity_scale(sev: Severity) -> f64 {
    match sev {
        Severity::Minor => 0.6,
        Severity::Moderate => 1.0,
        Severity::Severe => 1.5,
    }
}

fn paint_disk(img: &mut Image, cx: f64, cy: f64, r: f64, mut paint: impl FnMut(usize, usize, &mut Image)) {
    let x0 = ((cx - r).floor().max(0.0)) as usize;
    let y0 = ((cy - r).floor().max(0.0)) as usize;
    let x1 = ((cx + r).ceil() as usize).min(img.width.saturating_sub(1));
    let y1 = ((cy + r).ceil() as usize).min(img.height.saturating_sub(1));
    for y in y0..=y1.min(img.height - 1) {
        for x in x0..=x1.min(img.width - 1) {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            if dx * dx + dy * dy <= r * r {
                paint(x, y, img);
            }
        }
    }
}

fn paint_segment(
    img: &mut Image,
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    thickness: f64,
    mut paint: impl FnMut(usize, usize, &mut Image),
) {
    let t = thickness.max(0.5);
    let x0 = ((ax.min(bx) - t).floor().max(0.0)) as usize;
    let y0 = ((ay.min(by) - t).floor().max(0.0)) as usize;
    let x1 = ((ax.max(bx) + t).ceil() as usize).min(img.width.saturating_sub(1));
    let y1 = ((ay.max(by) + t).ceil() as usize).min(img.height.saturating_sub(1));
    let vx = bx - ax;
    let vy = by - ay;
    let len2 = vx * vx + vy * vy;
    for y in y0..=y1.min(img.height - 1) {
        for x in x0..=x1.min(img.width - 1) {
            let px = x as f64 + 0.5;
            let py = y as f64 + 0.5;
            let s = if len2 > 0.0 {
                (((px - ax) * vx + (py - ay) * vy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let dx = px - (ax + s * vx);
            let dy = py - (ay + s * vy);
            if dx * dx + dy * dy <= t * t {
                paint(x, y, img);
            }
        }
    }
}

fn set_noisy(img: &mut Image, x: usize, y: usize, base: [i32; 3], salt: u64, amp: i32) {
    let n = coord_noise(x, y, salt ^ 0xDEFE_C7, amp);
    let px = [
        (base[0] + n).clamp(0, 255) as u8,
        (base[1] + n).clamp(0, 255) as u8,
        (base[2] + n).clamp(0, 255) as u8,
    ];
    img.put(x, y, &px);
}

/// Paint `defect` at `severity` onto a copy of the clean scene. Returns
/// the flawed image and the annotation whose box is the exact bounding
/// rectangle of every pixel that differs from the clean render.
pub fn apply_defect(
    scene: &PartScene,
    defect: DefectType,
    severity: Severity,
    rng: &mut ChaCha8Rng,
) -> Result<(Image, Annotation)> {
    if !defects_for(scene.kind).contains(&defect) {
        return Err(Error::Config(format!(
            "defect {defect} does not occur on {} parts",
            scene.kind
        )));
    }
    let mut img = scene.image.clone();
    let scale = severity_scale(severity);
    let s = img.width as f64;
    let salt = scene.salt;

    match defect {
        DefectType::Scratch => {
            // Bright thin polyline wandering across the surface.
            let (sx, sy) = scene.surface_point(rng);
            let dir0 = rng.gen::<f64>() * 2.0 * PI;
            let turns: [f64; 3] = [
                (rng.gen::<f64>() * 2.0 - 1.0) * 0.5,
                (rng.gen::<f64>() * 2.0 - 1.0) * 0.5,
                (rng.gen::<f64>() * 2.0 - 1.0) * 0.5,
            ];
            let lens: [f64; 4] = [
                (0.05 + rng.gen::<f64>() * 0.04) * s,
                (0.05 + rng.gen::<f64>() * 0.04) * s,
                (0.05 + rng.gen::<f64>() * 0.04) * s,
                (0.05 + rng.gen::<f64>() * 0.04) * s,
            ];
            let thickness = 0.5 + 0.45 * scale;
            let mut dir = dir0;
            let (mut x, mut y) = (sx, sy);
            for (i, len) in lens.iter().enumerate() {
                let nx = x + len * scale * dir.cos();
                let ny = y + len * scale * dir.sin();
                paint_segment(&mut img, x, y, nx, ny, thickness, |px, py, im| {
                    set_noisy(im, px, py, [228, 230, 234], salt, 6)
                });
                x = nx;
                y = ny;
                if i < 3 {
                    dir += turns[i];
                }
            }
        }
        DefectType::Crack => {
            // Dark random walk with side branches.
            let (sx, sy) = scene.surface_point(rng);
            let dir0 = rng.gen::<f64>() * 2.0 * PI;
            let mut steps = [[0.0f64; 2]; 8];
            let mut dir = dir0;
            for step in steps.iter_mut() {
                dir += (rng.gen::<f64>() * 2.0 - 1.0) * 0.7;
                let len = (0.025 + rng.gen::<f64>() * 0.025) * s;
                *step = [len * dir.cos(), len * dir.sin()];
            }
            let branch_at = [rng.gen_range(1usize..5), rng.gen_range(4usize..8)];
            let mut branches = [[[0.0f64; 2]; 3]; 2];
            for b in branches.iter_mut() {
                let mut bdir = rng.gen::<f64>() * 2.0 * PI;
                for step in b.iter_mut() {
                    bdir += (rng.gen::<f64>() * 2.0 - 1.0) * 0.6;
                    let len = (0.015 + rng.gen::<f64>() * 0.02) * s;
                    *step = [len * bdir.cos(), len * bdir.sin()];
                }
            }
            let thickness = 0.5 + 0.35 * scale;
            let dark = |px: usize, py: usize, im: &mut Image| {
                set_noisy(im, px, py, [26, 25, 27], salt, 4)
            };
            let (mut x, mut y) = (sx, sy);
            let mut vertices = vec![(x, y)];
            for step in steps {
                let nx = x + step[0] * scale;
                let ny = y + step[1] * scale;
                paint_segment(&mut img, x, y, nx, ny, thickness, dark);
                x = nx;
                y = ny;
                vertices.push((x, y));
            }
            for (bi, b) in branches.iter().enumerate() {
                let (mut bx, mut by) = vertices[branch_at[bi]];
                for step in b {
                    let nx = bx + step[0] * scale;
                    let ny = by + step[1] * scale;
                    paint_segment(&mut img, bx, by, nx, ny, thickness * 0.8, dark);
                    bx = nx;
                    by = ny;
                }
            }
        }
        DefectType::Wear => {
            // Hard-edged low-contrast blotch: every covered pixel moves
            // toward the background by a small but certain amount.
            let (cx, cy) = scene.surface_point(rng);
            let phase0 = rng.gen::<f64>() * 2.0 * PI;
            let phase1 = rng.gen::<f64>() * 2.0 * PI;
            let base_r = (0.04 + rng.gen::<f64>() * 0.025) * s;
            let r = (base_r * scale).max(3.0);
            let delta = (6.0 + 5.0 * scale).round() as i32; // always >= 2
            let x0 = ((cx - r * 1.4).floor().max(0.0)) as usize;
            let y0 = ((cy - r * 1.4).floor().max(0.0)) as usize;
            let x1 = ((cx + r * 1.4).ceil() as usize).min(img.width - 1);
            let y1 = ((cy + r * 1.4).ceil() as usize).min(img.height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let dx = x as f64 + 0.5 - cx;
                    let dy = y as f64 + 0.5 - cy;
                    let phi = dy.atan2(dx);
                    let edge = r
                        * (1.0
                            + 0.22 * (3.0 * phi + phase0).sin()
                            + 0.13 * (5.0 * phi + phase1).sin());
                    if (dx * dx + dy * dy).sqrt() <= edge {
                        for c in 0..3 {
                            let v = img.get(x, y, c) as i32;
                            let toward = if v > 90 { -delta } else { delta };
                            img.set(x, y, c, (v + toward).clamp(0, 255) as u8);
                        }
                    }
                }
            }
        }
        DefectType::BrokenTooth => {
            let &SceneGeometry::Gear {
                cx,
                cy,
                root_r,
                tip_r,
                teeth,
                phase,
                ..
            } = &scene.geometry
            else {
                unreachable!("compatibility checked above")
            };
            let tooth = rng.gen_range(0..teeth);
            let pitch = 2.0 * PI / teeth as f64;
            // Center of the raised part of the chosen tooth.
            let center = phase + (tooth as f64 + 0.45) * pitch;
            let angular_half = 0.5 * pitch * 0.62 * scale.min(1.45);
            let depth = (tip_r - root_r + 3.0) * scale;
            let r_min = (tip_r - depth).max(root_r - 3.0);
            let x0 = ((cx - tip_r - 2.0).floor().max(0.0)) as usize;
            let y0 = ((cy - tip_r - 2.0).floor().max(0.0)) as usize;
            let x1 = ((cx + tip_r + 2.0).ceil() as usize).min(img.width - 1);
            let y1 = ((cy + tip_r + 2.0).ceil() as usize).min(img.height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let dx = x as f64 + 0.5 - cx;
                    let dy = y as f64 + 0.5 - cy;
                    let r = (dx * dx + dy * dy).sqrt();
                    if r <= r_min || r > tip_r + 1.5 {
                        continue;
                    }
                    let mut ang = dy.atan2(dx) - center;
                    while ang > PI {
                        ang -= 2.0 * PI;
                    }
                    while ang < -PI {
                        ang += 2.0 * PI;
                    }
                    if ang.abs() <= angular_half {
                        let px = background_at(x, y, salt);
                        img.put(x, y, &px);
                    }
                }
            }
        }
        DefectType::Burr => {
            // A blob of excess material sticking out of the outline.
            let (ex, ey, out) = scene.silhouette_point(rng);
            let base_r = (0.018 + rng.gen::<f64>() * 0.012) * s;
            let lobe = rng.gen::<f64>() * 2.0 * PI;
            let r = (base_r * scale).max(2.5);
            let cx = ex + out.cos() * r * 0.45;
            let cy = ey + out.sin() * r * 0.45;
            paint_disk(&mut img, cx, cy, r, |px, py, im| {
                set_noisy(im, px, py, [166, 168, 173], salt, 5)
            });
            // A smaller second lobe keeps the silhouette irregular.
            let c2x = cx + lobe.cos() * r * 0.5;
            let c2y = cy + lobe.sin() * r * 0.5;
            paint_disk(&mut img, c2x, c2y, r * 0.6, |px, py, im| {
                set_noisy(im, px, py, [166, 168, 173], salt, 5)
            });
        }
        DefectType::Deformation => {
            let &SceneGeometry::Bolt {
                shaft_x1,
                shaft_y1,
                shaft_x2,
                shaft_y2,
                ..
            } = &scene.geometry
            else {
                unreachable!("compatibility checked above")
            };
            let top = rng.gen::<bool>();
            let u = rng.gen::<f64>();
            let base_len = (0.10 + rng.gen::<f64>() * 0.06) * s;
            let base_amp = (0.028 + rng.gen::<f64>() * 0.012) * s;
            let len = base_len * scale;
            let amp = (base_amp * scale).max(2.0);
            let lo = shaft_x1 + 6.0;
            let hi = (shaft_x2 - 6.0 - len).max(lo + 1.0);
            let x_start = lo + u * (hi - lo);
            let edge = if top { shaft_y1 } else { shaft_y2 };
            let x0 = (x_start.floor().max(0.0)) as usize;
            let x1 = ((x_start + len).ceil() as usize).min(img.width - 1);
            for x in x0..=x1 {
                let fx = x as f64 + 0.5;
                let t = (fx - x_start) / len;
                if !(0.0..=1.0).contains(&t) {
                    continue;
                }
                let bulge = amp * (PI * t).sin().powi(2);
                let (y_lo, y_hi) = if top {
                    (edge - bulge, edge)
                } else {
                    (edge, edge + bulge)
                };
                let yy0 = (y_lo.floor().max(0.0)) as usize;
                let yy1 = ((y_hi.ceil()) as usize).min(img.height - 1);
                for y in yy0..=yy1 {
                    let fy = y as f64 + 0.5;
                    if fy >= y_lo && fy < y_hi {
                        set_noisy(&mut img, x, y, [150, 152, 158], salt, 5);
                    }
                }
            }
        }
        DefectType::Rust => {
            // A cluster of dark reddish-brown flecks; the hue difference
            // also shifts luminance, so the stain survives grayscale.
            let (cx, cy) = scene.surface_point(rng);
            const MAX_DOTS: usize = 140;
            let mut dots = [(0.0f64, 0.0f64, 0.0f64, 0i32); MAX_DOTS];
            for d in dots.iter_mut() {
                // Sum of two uniforms concentrates flecks near the center.
                let ox = rng.gen::<f64>() + rng.gen::<f64>() - 1.0;
                let oy = rng.gen::<f64>() + rng.gen::<f64>() - 1.0;
                let rad = 0.7 + rng.gen::<f64>() * 1.2;
                let tint = (rng.gen::<f64>() * 30.0) as i32;
                *d = (ox, oy, rad, tint);
            }
            let spread = 0.055 * s * scale;
            let used = (50.0 + 60.0 * scale) as usize;
            for &(ox, oy, rad, tint) in dots.iter().take(used.min(MAX_DOTS)) {
                let dx = cx + ox * spread;
                let dy = cy + oy * spread;
                paint_disk(&mut img, dx, dy, rad, |px, py, im| {
                    set_noisy(
                        im,
                        px,
                        py,
                        [96 + tint, 55 + tint / 2, 34],
                        salt,
                        6,
                    )
                });
            }
        }
    }

    let bbox = diff_bbox(&scene.image, &img).ok_or_else(|| {
        Error::Data(format!(
            "{defect} at {} left no pixel trace on the {}",
            severity.name(),
            scene.kind
        ))
    })?;
    let (x_min, y_min, x_max, y_max) = bbox;
    let w = (x_max - x_min + 1) as f64;
    let h = (y_max - y_min + 1) as f64;
    let ann = Annotation {
        class_id: defect.index(),
        cx: (x_min as f64 + w / 2.0) / s,
        cy: (y_min as f64 + h / 2.0) / s,
        w: w / s,
        h: h / s,
        severity: Some(severity),
    };
    Ok((img, ann))
}

/// Bounding rectangle of pixels that differ between two same-sized
/// images, as inclusive (x_min, y_min, x_max, y_max).
pub fn diff_bbox(a: &Image, b: &Image) -> Option<(usize, usize, usize, usize)> {
    assert_eq!(a.width, b.width);
    assert_eq!(a.height, b.height);
    assert_eq!(a.channels, b.channels);
    let mut out: Option<(usize, usize, usize, usize)> = None;
    for y in 0..a.height {
        for x in 0..a.width {
            let base = (y * a.width + x) * a.channels;
            if a.data[base..base + a.channels] != b.data[base..base + a.channels] {
                out = Some(match out {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
    }
    out
}
