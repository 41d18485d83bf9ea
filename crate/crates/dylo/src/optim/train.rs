//! The training loop: batched epochs over a manifest-backed dataset with
//! per-epoch validation, CSV logging, best-checkpoint tracking, plateau
//! learning-rate decay, and early stopping. Every random draw descends
//! from the run seed, so a repeated run writes identical bytes.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::boxes::DetBox;
use crate::checkpoint::{self, CheckpointMeta};
use crate::data::{
    augment, image_to_tensor, remap_annotation, sample_rng, AugmentConfig, Dataset,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, nms, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD, MATCH_IOU,
};
use crate::loss::{total_loss, LossWeights};
use crate::nn::{decode, Detector, ModelConfig};
use crate::optim::{should_stop_early, Adam, AdamConfig, PlateauDecay};
use crate::target::{assign_targets, Assignment};
use crate::tensor::{Scalar, Tape, Tensor};

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Stop once validation mAP has not improved for this many epochs.
    pub early_stop_patience: usize,
    /// Learning-rate decay triggered by a stalled validation loss.
    pub plateau: PlateauDecay,
    pub augment: AugmentConfig,
    pub loss_weights: LossWeights,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            weight_decay: 5e-4,
            max_epochs: 200,
            early_stop_patience: 20,
            plateau: PlateauDecay::default(),
            augment: AugmentConfig::default(),
            loss_weights: LossWeights::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if self.weight_decay < 0.0 || !self.weight_decay.is_finite() {
            return Err(Error::Config(format!(
                "weight decay {} must be non-negative",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("epoch budget must be positive".into()));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::Config("early-stop patience must be positive".into()));
        }
        Ok(())
    }
}

/// One epoch's logged metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_map: f64,
}

/// Result of a full training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<EpochStats>,
    /// Epoch whose weights the best checkpoint holds (1-based), if any
    /// epoch improved on a zero mAP.
    pub best_epoch: Option<usize>,
    pub best_val_map: f64,
    pub stopped_early: bool,
}

/// One sample made ready for the network: input values, assigned targets,
/// and the truth boxes in model pixel space.
struct Prepared<T> {
    values: Vec<T>,
    assignment: Assignment,
    truth: Vec<DetBox>,
}

fn prepare<T: Scalar>(
    dataset: &Dataset,
    entry_index: usize,
    model_cfg: &ModelConfig,
    aug: Option<(&AugmentConfig, &mut ChaCha8Rng)>,
    split: &str,
) -> Result<Prepared<T>> {
    let entry = dataset.entries(split)[entry_index];
    let sample = dataset.load_sample(entry)?;
    let (img, anns) = match aug {
        Some((cfg, rng)) => {
            let a = augment(&sample.image, &sample.boxes, cfg, rng);
            (a.image, a.annotations)
        }
        None => (sample.image, sample.boxes),
    };
    let (tensor, lb) = image_to_tensor::<T>(&img, model_cfg.input_size, model_cfg.input_channels)?;
    let truth: Vec<DetBox> = anns.iter().map(|a| remap_annotation(a, &lb)).collect();
    let assignment = assign_targets(&truth, model_cfg)?;
    Ok(Prepared {
        values: tensor.to_vec(),
        assignment,
        truth,
    })
}

fn stack_batch<T: Scalar>(items: &[Prepared<T>], model_cfg: &ModelConfig) -> Result<Tensor<T>> {
    let s = model_cfg.input_size;
    let c = model_cfg.input_channels;
    let mut data = Vec::with_capacity(items.len() * c * s * s);
    for item in items {
        data.extend_from_slice(&item.values);
    }
    Tensor::new(data, &[items.len(), c, s, s])
}

fn epoch_shuffle_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    // Distinct stream from per-sample augmentation draws.
    let z = seed
        .wrapping_mul(0xA076_1D64_78BD_642F)
        .wrapping_add((epoch as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB))
        .wrapping_add(0x5151);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 29))
}

fn write_log(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut text = String::from("epoch,lr,train_loss,val_loss,val_map\n");
    for h in history {
        text.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            h.epoch, h.learning_rate, h.train_loss, h.val_loss, h.val_map
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Train a fresh detector on the dataset's train split, scoring the val
/// split each epoch. Writes a CSV of per-epoch metrics to `log_path` and
/// the best-validation-mAP weights to `checkpoint_path` when given;
/// `on_epoch` observes each epoch's stats as they complete. Returns the
/// run summary together with the trained model (weights as of the final
/// epoch, not the best one).
pub fn train<T: Scalar>(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    log_path: Option<&Path>,
    checkpoint_path: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(TrainOutcome, Detector<T>)> {
    cfg.validate()?;
    model_cfg.validate()?;
    if dataset.num_classes() != model_cfg.num_classes {
        return Err(Error::Config(format!(
            "dataset defines {} classes but the model is configured for {}",
            dataset.num_classes(),
            model_cfg.num_classes
        )));
    }
    let n_train = dataset.entries("train").len();
    let n_val = dataset.entries("val").len();
    if n_train == 0 {
        return Err(Error::Data("the dataset has no training entries".into()));
    }
    if n_val == 0 {
        return Err(Error::Data("the dataset has no validation entries".into()));
    }
    let class_names = dataset.manifest.class_names.clone();

    let model: Detector<T> = Detector::new(model_cfg)?;
    let params = model.named_params();
    let mut opt = Adam::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            ..Default::default()
        },
        &params,
    );

    let mut history: Vec<EpochStats> = Vec::new();
    let mut map_history: Vec<f64> = Vec::new();
    let mut plateau_window: Vec<f64> = Vec::new();
    let mut best_val_map = 0.0f64;
    let mut best_epoch: Option<usize> = None;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        // --- training pass ---
        let mut order: Vec<usize> = (0..n_train).collect();
        order.shuffle(&mut epoch_shuffle_rng(cfg.seed, epoch));
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let mut items = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let mut rng = sample_rng(cfg.seed, epoch, idx);
                items.push(prepare::<T>(
                    dataset,
                    idx,
                    model_cfg,
                    Some((&cfg.augment, &mut rng)),
                    "train",
                )?);
            }
            let input = stack_batch(&items, model_cfg)?;
            let assignments: Vec<Assignment> =
                items.into_iter().map(|p| p.assignment).collect();
            let mut tape = Tape::new();
            let preds = model.forward(&mut tape, &input)?;
            let report = total_loss(&mut tape, &preds, &assignments, &cfg.loss_weights)?;
            tape.backward(&report.total)?;
            opt.step(&params)?;
            model.zero_grads();
            loss_sum += report.total.item().to_f64() * chunk.len() as f64;
        }
        let train_loss = loss_sum / n_train as f64;

        // --- validation pass ---
        let mut val_loss_sum = 0.0f64;
        let mut scored: Vec<(Vec<DetBox>, Vec<DetBox>)> = Vec::with_capacity(n_val);
        for idx in 0..n_val {
            let item = prepare::<T>(dataset, idx, model_cfg, None, "val")?;
            let input = Tensor::new(
                item.values.clone(),
                &[1, model_cfg.input_channels, model_cfg.input_size, model_cfg.input_size],
            )?;
            let mut tape = Tape::inference();
            let preds = model.forward(&mut tape, &input)?;
            let report = total_loss(
                &mut tape,
                &preds,
                std::slice::from_ref(&item.assignment),
                &cfg.loss_weights,
            )?;
            val_loss_sum += report.total.item().to_f64();
            let raw = decode(&preds, DEFAULT_CONF_THRESHOLD)?;
            let dets = nms(&raw, DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD);
            scored.push((dets, item.truth));
        }
        let val_loss = val_loss_sum / n_val as f64;
        let report = evaluate(&scored, &class_names, MATCH_IOU)?;
        let val_map = report.mean_average_precision;

        let stats = EpochStats {
            epoch,
            learning_rate: opt.learning_rate(),
            train_loss,
            val_loss,
            val_map,
        };
        history.push(stats);
        on_epoch(&stats);
        if let Some(path) = log_path {
            write_log(path, &history)?;
        }

        if val_map > best_val_map {
            best_val_map = val_map;
            best_epoch = Some(epoch);
            if let Some(path) = checkpoint_path {
                checkpoint::save(
                    path,
                    &model,
                    model_cfg,
                    &CheckpointMeta {
                        epoch,
                        best_val_map,
                        seed: cfg.seed,
                    },
                )?;
            }
        }

        map_history.push(val_map);
        if should_stop_early(&map_history, cfg.early_stop_patience) {
            stopped_early = true;
            break;
        }

        plateau_window.push(val_loss);
        if cfg.plateau.plateaued(&plateau_window) {
            let next = cfg.plateau.next_rate(opt.learning_rate());
            opt.set_learning_rate(next);
            plateau_window.clear();
        }
    }

    Ok((
        TrainOutcome {
            history,
            best_epoch,
            best_val_map,
            stopped_early,
        },
        model,
    ))
}
