//! Procedural machined-part renderer: bearings, gears, and bolts drawn as
//! RGB rasters from a small amount of jittered geometry.
//!
//! Pixel colors are pure functions of the geometry plus a per-image noise
//! salt, so regions repainted later (for instance to erase a gear tooth)
//! reproduce the untouched background byte for byte.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::raster::Image;
use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PartKind {
    Bearing,
    Gear,
    Bolt,
}

impl PartKind {
    pub const ALL: [PartKind; 3] = [PartKind::Bearing, PartKind::Gear, PartKind::Bolt];

    pub fn name(self) -> &'static str {
        match self {
            PartKind::Bearing => "bearing",
            PartKind::Gear => "gear",
            PartKind::Bolt => "bolt",
        }
    }
}

impl fmt::Display for PartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PartKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "bearing" => Ok(PartKind::Bearing),
            "gear" => Ok(PartKind::Gear),
            "bolt" => Ok(PartKind::Bolt),
            other => Err(Error::Config(format!(
                "unknown part kind {other:?} (bearing, gear, bolt)"
            ))),
        }
    }
}

/// Jittered shape parameters a part was drawn from; defect injectors use
/// these to land on plausible locations.
#[derive(Clone, Debug)]
pub enum SceneGeometry {
    Bearing {
        cx: f64,
        cy: f64,
        outer_r: f64,
        inner_r: f64,
        bore_r: f64,
    },
    Gear {
        cx: f64,
        cy: f64,
        root_r: f64,
        tip_r: f64,
        teeth: usize,
        phase: f64,
        hub_r: f64,
    },
    Bolt {
        head_cx: f64,
        head_cy: f64,
        head_r: f64,
        shaft_x1: f64,
        shaft_y1: f64,
        shaft_x2: f64,
        shaft_y2: f64,
    },
}

/// A rendered clean part: image, geometry, and the noise salt needed to
/// repaint any region identically.
#[derive(Clone, Debug)]
pub struct PartScene {
    pub kind: PartKind,
    pub image: Image,
    pub geometry: SceneGeometry,
    pub salt: u64,
}

/// Deterministic per-pixel noise in [-amp, amp] from the coordinates and a
/// salt (no stream state, so any region can be repainted in isolation).
pub fn coord_noise(x: usize, y: usize, salt: u64, amp: i32) -> i32 {
    let mut z = (x as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        .wrapping_add(salt);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let span = (2 * amp + 1) as u64;
    (z % span) as i32 - amp
}

fn with_noise(base: [i32; 3], x: usize, y: usize, salt: u64, amp: i32) -> [u8; 3] {
    let n = coord_noise(x, y, salt, amp);
    [
        (base[0] + n).clamp(0, 255) as u8,
        (base[1] + n).clamp(0, 255) as u8,
        (base[2] + n).clamp(0, 255) as u8,
    ]
}

const BG: [i32; 3] = [40, 41, 44];

/// Background shade at one pixel.
pub fn background_at(x: usize, y: usize, salt: u64) -> [u8; 3] {
    with_noise(BG, x, y, salt, 4)
}

/// Angular tooth profile in [0, 1]: a trapezoid repeated `teeth` times.
fn tooth_profile(u: f64) -> f64 {
    let u = u - u.floor();
    if u < 0.15 {
        0.0
    } else if u < 0.25 {
        (u - 0.15) / 0.1
    } else if u < 0.65 {
        1.0
    } else if u < 0.75 {
        1.0 - (u - 0.65) / 0.1
    } else {
        0.0
    }
}

/// Gear silhouette radius at polar angle `theta`.
pub fn gear_radius(geometry: &SceneGeometry, theta: f64) -> f64 {
    match geometry {
        SceneGeometry::Gear {
            root_r,
            tip_r,
            teeth,
            phase,
            ..
        } => {
            let u = (theta - phase) / (2.0 * PI) * *teeth as f64;
            root_r + (tip_r - root_r) * tooth_profile(u)
        }
        _ => panic!("gear_radius on a non-gear geometry"),
    }
}

fn in_hexagon(px: f64, py: f64, cx: f64, cy: f64, r: f64) -> bool {
    // Pointy-top regular hexagon as six half-plane tests.
    for i in 0..6 {
        let a0 = PI / 3.0 * i as f64 + PI / 6.0;
        // Outward normal of each edge; the apothem is r * sqrt(3)/2.
        let nx = a0.cos();
        let ny = a0.sin();
        if (px - cx) * nx + (py - cy) * ny > r * 3f64.sqrt() / 2.0 {
            return false;
        }
    }
    true
}

/// Shade one pixel of a clean part (background included). The defect
/// injectors reuse this to repaint regions they restore.
pub fn shade(kind: PartKind, geometry: &SceneGeometry, x: usize, y: usize, salt: u64) -> [u8; 3] {
    let px = x as f64 + 0.5;
    let py = y as f64 + 0.5;
    match (kind, geometry) {
        (
            PartKind::Bearing,
            SceneGeometry::Bearing {
                cx,
                cy,
                outer_r,
                inner_r,
                bore_r,
            },
        ) => {
            let r = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt();
            if r > *outer_r || r <= *bore_r {
                background_at(x, y, salt)
            } else if r > *inner_r {
                // Outer race with shallow radial banding.
                let band = (8.0
                    * ((r - inner_r) / (outer_r - inner_r) * 2.0 * PI).cos())
                    as i32;
                with_noise([170 + band, 172 + band, 177 + band], x, y, salt, 4)
            } else {
                with_noise([146, 148, 153], x, y, salt, 4)
            }
        }
        (PartKind::Gear, SceneGeometry::Gear { cx, cy, hub_r, tip_r, .. }) => {
            let dx = px - cx;
            let dy = py - cy;
            let r = (dx * dx + dy * dy).sqrt();
            let theta = dy.atan2(dx);
            if r <= *hub_r || r > gear_radius(geometry, theta) {
                background_at(x, y, salt)
            } else {
                let grad = (-18.0 * r / tip_r) as i32;
                with_noise([168 + grad, 170 + grad, 175 + grad], x, y, salt, 4)
            }
        }
        (
            PartKind::Bolt,
            SceneGeometry::Bolt {
                head_cx,
                head_cy,
                head_r,
                shaft_x1,
                shaft_y1,
                shaft_x2,
                shaft_y2,
            },
        ) => {
            if in_hexagon(px, py, *head_cx, *head_cy, *head_r) {
                let rho2 = ((px - head_cx).powi(2) + (py - head_cy).powi(2)) / head_r.powi(2);
                let dome = (-30.0 * rho2) as i32;
                with_noise([170 + dome, 172 + dome, 178 + dome], x, y, salt, 4)
            } else if px >= *shaft_x1 && px < *shaft_x2 && py >= *shaft_y1 && py < *shaft_y2 {
                // Thread ridges along the shaft plus cylindrical shading.
                let ridge = if ((px - shaft_x1) as i64).rem_euclid(6) < 3 {
                    12
                } else {
                    -12
                };
                let mid = (shaft_y1 + shaft_y2) / 2.0;
                let half = (shaft_y2 - shaft_y1) / 2.0;
                let round = (-35.0 * ((py - mid) / half).powi(2)) as i32;
                with_noise(
                    [152 + ridge + round, 154 + ridge + round, 160 + ridge + round],
                    x,
                    y,
                    salt,
                    4,
                )
            } else {
                background_at(x, y, salt)
            }
        }
        _ => panic!("geometry does not match part kind"),
    }
}

/// Draw one clean part with jittered geometry.
pub fn render_part(kind: PartKind, size: usize, rng: &mut ChaCha8Rng) -> PartScene {
    let s = size as f64;
    let salt: u64 = rng.gen();
    let jitter = |rng: &mut ChaCha8Rng, frac: f64| (rng.gen::<f64>() * 2.0 - 1.0) * frac * s;
    let geometry = match kind {
        PartKind::Bearing => {
            let cx = s / 2.0 + jitter(rng, 0.02);
            let cy = s / 2.0 + jitter(rng, 0.02);
            let outer_r = 0.40 * s + jitter(rng, 0.015);
            SceneGeometry::Bearing {
                cx,
                cy,
                outer_r,
                inner_r: outer_r * 0.66,
                bore_r: outer_r * 0.36,
            }
        }
        PartKind::Gear => {
            let cx = s / 2.0 + jitter(rng, 0.02);
            let cy = s / 2.0 + jitter(rng, 0.02);
            let tip_r = 0.40 * s + jitter(rng, 0.015);
            SceneGeometry::Gear {
                cx,
                cy,
                root_r: tip_r * 0.78,
                tip_r,
                teeth: 12,
                phase: rng.gen::<f64>() * 2.0 * PI,
                hub_r: tip_r * 0.18,
            }
        }
        PartKind::Bolt => {
            let head_cx = 0.27 * s + jitter(rng, 0.015);
            let head_cy = s / 2.0 + jitter(rng, 0.02);
            let head_r = 0.17 * s + jitter(rng, 0.01);
            let half_t = 0.07 * s + jitter(rng, 0.005);
            SceneGeometry::Bolt {
                head_cx,
                head_cy,
                head_r,
                shaft_x1: head_cx,
                shaft_y1: head_cy - half_t,
                shaft_x2: (0.88 * s + jitter(rng, 0.01)).min(s - 2.0),
                shaft_y2: head_cy + half_t,
            }
        }
    };
    let mut image = Image::new(size, size, 3, 0);
    for y in 0..size {
        for x in 0..size {
            let px = shade(kind, &geometry, x, y, salt);
            image.put(x, y, &px);
        }
    }
    PartScene {
        kind,
        image,
        geometry,
        salt,
    }
}

impl PartScene {
    /// A random point on the part's metal surface (inset from edges).
    pub fn surface_point(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match &self.geometry {
            SceneGeometry::Bearing {
                cx,
                cy,
                outer_r,
                bore_r,
                ..
            } => {
                let phi = rng.gen::<f64>() * 2.0 * PI;
                let r = bore_r + 3.0 + rng.gen::<f64>() * (outer_r - bore_r - 6.0).max(1.0);
                (cx + r * phi.cos(), cy + r * phi.sin())
            }
            SceneGeometry::Gear {
                cx, cy, root_r, hub_r, ..
            } => {
                let phi = rng.gen::<f64>() * 2.0 * PI;
                let r = hub_r + 3.0 + rng.gen::<f64>() * (root_r - hub_r - 6.0).max(1.0);
                (cx + r * phi.cos(), cy + r * phi.sin())
            }
            SceneGeometry::Bolt {
                shaft_x1,
                shaft_y1,
                shaft_x2,
                shaft_y2,
                ..
            } => {
                let x = shaft_x1 + 3.0 + rng.gen::<f64>() * (shaft_x2 - shaft_x1 - 6.0).max(1.0);
                let y = shaft_y1 + 2.0 + rng.gen::<f64>() * (shaft_y2 - shaft_y1 - 4.0).max(1.0);
                (x, y)
            }
        }
    }

    /// A random point on the part's outline plus the outward direction.
    pub fn silhouette_point(&self, rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
        match &self.geometry {
            SceneGeometry::Bearing { cx, cy, outer_r, .. } => {
                let phi = rng.gen::<f64>() * 2.0 * PI;
                (cx + outer_r * phi.cos(), cy + outer_r * phi.sin(), phi)
            }
            SceneGeometry::Gear { cx, cy, .. } => {
                let phi = rng.gen::<f64>() * 2.0 * PI;
                let r = gear_radius(&self.geometry, phi);
                (cx + r * phi.cos(), cy + r * phi.sin(), phi)
            }
            SceneGeometry::Bolt {
                shaft_x1,
                shaft_y1,
                shaft_x2,
                shaft_y2,
                ..
            } => {
                let x = shaft_x1
                    + (shaft_x2 - shaft_x1) * (0.3 + rng.gen::<f64>() * 0.65);
                if rng.gen::<bool>() {
                    (x, *shaft_y1, -PI / 2.0)
                } else {
                    (x, *shaft_y2, PI / 2.0)
                }
            }
        }
    }
}
