//! Learning-rate plateau decay and early stopping, as pure decisions over
//! metric histories so the policies are testable without running training.

/// Relative margin a validation loss must beat the running best by to
/// count as an improvement.
pub const MIN_RELATIVE_IMPROVEMENT: f64 = 1e-4;

/// Plateau policy: after `patience` consecutive epochs without a material
/// improvement, multiply the learning rate by `factor`, never dropping
/// below `floor`.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateauDecay {
    pub factor: f64,
    pub floor: f64,
    pub patience: usize,
}

impl Default for PlateauDecay {
    fn default() -> Self {
        PlateauDecay {
            factor: 0.1,
            floor: 1e-6,
            patience: 10,
        }
    }
}

impl PlateauDecay {
    /// True when the tail of `history` (validation losses since the last
    /// decay) shows `patience` epochs with no improvement over the best
    /// value seen up to that point.
    pub fn plateaued(&self, history: &[f64]) -> bool {
        if history.is_empty() {
            return false;
        }
        let mut best = history[0];
        let mut last_improvement = 0usize;
        for (i, &v) in history.iter().enumerate().skip(1) {
            if v < best * (1.0 - MIN_RELATIVE_IMPROVEMENT) {
                best = v;
                last_improvement = i;
            }
        }
        history.len() - 1 - last_improvement >= self.patience
    }

    /// The learning rate after applying one decay, clamped to the floor.
    pub fn next_rate(&self, lr: f64) -> f64 {
        (lr * self.factor).max(self.floor)
    }
}

/// Early stopping on the epoch-wise validation detection quality: stop
/// once `patience` epochs have passed since the best value (first epoch
/// wins ties).
pub fn should_stop_early(map_history: &[f64], patience: usize) -> bool {
    if map_history.is_empty() {
        return false;
    }
    let mut best_idx = 0usize;
    for (i, &v) in map_history.iter().enumerate().skip(1) {
        if v > map_history[best_idx] {
            best_idx = i;
        }
    }
    map_history.len() - 1 - best_idx >= patience
}
