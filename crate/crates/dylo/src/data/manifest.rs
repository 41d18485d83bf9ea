//! Dataset manifest: a JSON index tying images to annotations, split
//! membership, and the labeling scheme the dataset was produced under.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::strategy::LabelStrategy;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Image path relative to the manifest's directory.
    pub image: String,
    /// Annotation path relative to the manifest's directory.
    pub annotation: String,
    /// "train" or "val".
    pub split: String,
    /// Part kind rendered in the image (stratification key component).
    pub part: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub strategy: LabelStrategy,
    /// Raw defect-type names, indexed by the type ids in annotations.
    pub type_names: Vec<String>,
    /// Final class names under `strategy`.
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.type_names.is_empty() {
            return Err(Error::Config("manifest lists no defect types".into()));
        }
        let expected = self.strategy.class_names(&self.type_names);
        if self.class_names != expected {
            return Err(Error::Config(format!(
                "manifest class names do not match the {} strategy over its types",
                self.strategy
            )));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.split != "train" && e.split != "val" {
                return Err(Error::Config(format!(
                    "entry {i} has split {:?}, expected train or val",
                    e.split
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn split_entries(&self, split: &str) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Resolve an entry-relative path against the manifest's location.
    pub fn resolve(manifest_path: &Path, relative: &str) -> PathBuf {
        match manifest_path.parent() {
            Some(dir) => dir.join(relative),
            None => PathBuf::from(relative),
        }
    }
}
