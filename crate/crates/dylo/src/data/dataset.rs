//! Loading manifest-indexed samples from disk with the labeling strategy
//! applied.

use std::path::{Path, PathBuf};

use crate::data::annotation::{read_annotation_file, Annotation};
use crate::data::manifest::{Manifest, ManifestEntry};
use crate::data::raster::Image;
use crate::error::Result;

/// One loaded training/validation sample: the raw image plus its
/// strategy-mapped boxes (class ids are final detector classes).
#[derive(Clone, Debug)]
pub struct Sample {
    pub image: Image,
    pub boxes: Vec<Annotation>,
}

/// A manifest bound to its on-disk location.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: Manifest,
    manifest_path: PathBuf,
}

impl Dataset {
    pub fn open(manifest_path: &Path) -> Result<Dataset> {
        let manifest = Manifest::load(manifest_path)?;
        Ok(Dataset {
            manifest,
            manifest_path: manifest_path.to_path_buf(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.manifest.num_classes()
    }

    pub fn entries(&self, split: &str) -> Vec<&ManifestEntry> {
        self.manifest.split_entries(split)
    }

    /// Read one entry's image and annotations, mapping raw type labels
    /// through the manifest's strategy.
    pub fn load_sample(&self, entry: &ManifestEntry) -> Result<Sample> {
        let image = Image::read_pnm(&Manifest::resolve(&self.manifest_path, &entry.image))?;
        let raw =
            read_annotation_file(&Manifest::resolve(&self.manifest_path, &entry.annotation))?;
        let boxes = self
            .manifest
            .strategy
            .apply(&raw, self.manifest.type_names.len())?;
        Ok(Sample { image, boxes })
    }
}
