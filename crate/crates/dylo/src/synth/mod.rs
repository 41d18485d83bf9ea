//! Synthetic data: procedural part rendering, defect injection, and full
//! dataset generation with manifests.

pub mod dataset;
pub mod defects;
pub mod parts;

pub use dataset::{generate, largest_remainder, SynthConfig};
pub use defects::{apply_defect, defects_for, DefectType, TYPE_NAMES};
pub use parts::{background_at, render_part, PartKind, PartScene, SceneGeometry};
