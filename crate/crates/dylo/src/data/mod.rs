//! Dataset tooling: annotation parsing, labeling strategies, manifests,
//! stratified splitting, raster I/O, preprocessing, and augmentation.

pub mod annotation;
pub mod augment;
pub mod dataset;
pub mod manifest;
pub mod preprocess;
pub mod raster;
pub mod split;
pub mod strategy;

pub use annotation::{
    format_annotations, parse_annotations, read_annotation_file, write_annotation_file,
    Annotation, Severity,
};
pub use augment::{augment, sample_rng, AugmentConfig, Augmented, MIN_BOX_PX};
pub use dataset::{Dataset, Sample};
pub use manifest::{Manifest, ManifestEntry};
pub use preprocess::{
    image_to_tensor, letterbox_image, letterbox_params, remap_annotation, unmap_detection,
    Letterbox, PAD_FILL,
};
pub use raster::Image;
pub use split::{stratified_split, SplitAssignment};
pub use strategy::LabelStrategy;
