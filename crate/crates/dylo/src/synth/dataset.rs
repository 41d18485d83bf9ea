//! Whole-dataset generation: render part/defect combinations to disk and
//! emit a manifest with a stratified train/val split.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::annotation::{write_annotation_file, Severity};
use crate::data::manifest::{Manifest, ManifestEntry};
use crate::data::split::stratified_split;
use crate::data::strategy::LabelStrategy;
use crate::error::{Error, Result};
use crate::synth::defects::{apply_defect, defects_for, DefectType, TYPE_NAMES};
use crate::synth::parts::{render_part, PartKind};

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Square image edge in pixels.
    pub img_size: usize,
    /// Total images per (part, defect) pairing, clean ones included.
    pub per_pair: usize,
    /// Fraction of all images rendered without any flaw.
    pub defect_free_fraction: f64,
    /// Relative share of minor/moderate/severe among flawed images.
    pub severity_mix: [f64; 3],
    /// Labeling scheme recorded in the manifest.
    pub strategy: LabelStrategy,
    /// Share of each stratum that goes to the training split.
    pub train_ratio: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            img_size: 256,
            per_pair: 20,
            defect_free_fraction: 0.25,
            severity_mix: [1.0, 1.0, 1.0],
            strategy: LabelStrategy::SeverityBased,
            train_ratio: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.img_size < 32 {
            return Err(Error::Config(format!(
                "image size {} is below the 32 px minimum",
                self.img_size
            )));
        }
        if self.per_pair == 0 {
            return Err(Error::Config("per-pair image count must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.defect_free_fraction) {
            return Err(Error::Config(format!(
                "defect-free fraction {} must lie in [0, 1)",
                self.defect_free_fraction
            )));
        }
        if self.severity_mix.iter().any(|w| *w < 0.0 || !w.is_finite())
            || self.severity_mix.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Config(format!(
                "severity mix {:?} must be non-negative with a positive sum",
                self.severity_mix
            )));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config(format!(
                "train ratio {} must lie strictly between 0 and 1",
                self.train_ratio
            )));
        }
        Ok(())
    }
}

/// Apportion `total` integer slots according to `weights`: floor quotas
/// first, then one extra slot each to the largest fractional remainders
/// (earlier entries win exact ties).
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..total.saturating_sub(assigned) {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

/// Per-image seed derived from the dataset seed and the image index so
/// images can be regenerated independently and byte-identically.
fn image_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((index as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^ (z >> 27)
}

struct PlannedImage {
    kind: PartKind,
    flaw: Option<(DefectType, Severity)>,
}

fn plan(cfg: &SynthConfig) -> Vec<PlannedImage> {
    let pairs: Vec<(PartKind, DefectType)> = PartKind::ALL
        .iter()
        .flat_map(|&k| defects_for(k).into_iter().map(move |d| (k, d)))
        .collect();
    let total = pairs.len() * cfg.per_pair;
    let total_free = (cfg.defect_free_fraction * total as f64).round() as usize;
    let free_per_pair = largest_remainder(&vec![1.0; pairs.len()], total_free);
    let mut out = Vec::with_capacity(total);
    for (p, &(kind, defect)) in pairs.iter().enumerate() {
        let n_free = free_per_pair[p].min(cfg.per_pair);
        let n_flawed = cfg.per_pair - n_free;
        let by_severity = largest_remainder(&cfg.severity_mix, n_flawed);
        for _ in 0..n_free {
            out.push(PlannedImage { kind, flaw: None });
        }
        for (si, sev) in Severity::ALL.into_iter().enumerate() {
            for _ in 0..by_severity[si] {
                out.push(PlannedImage {
                    kind,
                    flaw: Some((defect, sev)),
                });
            }
        }
    }
    out
}

/// Render the full dataset under `root` (images/, labels/, manifest.json)
/// and return the manifest. Output bytes depend only on the config.
pub fn generate(root: &Path, cfg: &SynthConfig) -> Result<Manifest> {
    cfg.validate()?;
    let images_dir = root.join("images");
    let labels_dir = root.join("labels");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    std::fs::create_dir_all(&labels_dir).map_err(|e| Error::io(&labels_dir, e))?;

    let planned = plan(cfg);
    let mut strata = Vec::with_capacity(planned.len());
    let mut rel_paths = Vec::with_capacity(planned.len());
    for (idx, item) in planned.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(image_seed(cfg.seed, idx));
        let scene = render_part(item.kind, cfg.img_size, &mut rng);
        let (image, anns) = match item.flaw {
            None => (scene.image.clone(), Vec::new()),
            Some((defect, sev)) => {
                let (img, ann) = apply_defect(&scene, defect, sev, &mut rng)?;
                (img, vec![ann])
            }
        };
        let image_rel = format!("images/img_{idx:05}.ppm");
        let label_rel = format!("labels/img_{idx:05}.txt");
        image.write_pnm(&root.join(&image_rel))?;
        write_annotation_file(&root.join(&label_rel), &anns)?;
        strata.push(match item.flaw {
            None => format!("{}:none", item.kind),
            Some((defect, _)) => format!("{}:{}", item.kind, defect),
        });
        rel_paths.push((image_rel, label_rel));
    }

    let split = stratified_split(&strata, cfg.train_ratio, cfg.seed)?;
    let mut split_of = vec!["train"; planned.len()];
    for &i in &split.val {
        split_of[i] = "val";
    }

    let type_names: Vec<String> = TYPE_NAMES.iter().map(|s| s.to_string()).collect();
    let manifest = Manifest {
        strategy: cfg.strategy,
        class_names: cfg.strategy.class_names(&type_names),
        type_names,
        entries: planned
            .iter()
            .zip(rel_paths)
            .zip(split_of)
            .map(|((item, (image, annotation)), split)| ManifestEntry {
                image,
                annotation,
                split: split.to_string(),
                part: item.kind.name().to_string(),
            })
            .collect(),
    };
    manifest.validate()?;
    manifest.save(&root.join("manifest.json"))?;
    Ok(manifest)
}
