//! Stratified train/validation splitting with a seeded shuffle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Item indices per side of the split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Split items into train/val so each stratum contributes close to
/// `train_ratio` of itself to the training side: within every stratum the
/// items are shuffled (seeded) and the first `ceil(ratio * n)` go to
/// train, keeping the per-stratum deviation below one item. Strata are
/// processed in key order, so the outcome depends only on the inputs.
pub fn stratified_split(
    strata: &[String],
    train_ratio: f64,
    seed: u64,
) -> Result<SplitAssignment> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!(
            "train ratio {train_ratio} must lie strictly between 0 and 1"
        )));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, key) in strata.iter().enumerate() {
        groups.entry(key.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (_key, mut members) in groups {
        members.shuffle(&mut rng);
        let n_train = ((train_ratio * members.len() as f64).ceil() as usize).min(members.len());
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok(SplitAssignment { train, val })
}
