//! Hyperparameter grid search: trains one model per (learning rate,
//! weight decay) combination, each run on its own thread, then ranks the
//! runs by final validation mAP.

use std::path::PathBuf;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::ModelConfig;
use crate::optim::train::{train, TrainConfig, TrainOutcome};
use crate::tensor::Scalar;

/// One grid combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub weight_decay: f64,
}

/// A finished run with the metrics the ranking uses.
#[derive(Clone, Debug)]
pub struct GridRun {
    pub point: GridPoint,
    pub outcome: TrainOutcome,
    pub final_val_loss: f64,
    pub final_val_map: f64,
}

/// All runs plus the index of the winner.
#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub runs: Vec<GridRun>,
    pub best: usize,
}

/// The default sweep: three learning-rate decades crossed with weight
/// decay off and on.
pub fn default_grid() -> (Vec<f64>, Vec<f64>) {
    (vec![1e-2, 1e-3, 1e-4], vec![0.0, 5e-4])
}

/// Cross `rates` with `decays` (row-major: all decays for the first rate,
/// then the next rate) and train each combination from the same base
/// config. When `log_dir` is given, each run writes
/// `run_{index:02}_lr{lr}_wd{wd}.csv` there. Runs execute on separate
/// threads; results come back in grid order regardless of finish order.
///
/// Ranking: highest final-epoch validation mAP wins; ties fall to the
/// lower final validation loss, then to the earlier grid position.
pub fn grid_search<T: Scalar>(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    base: &TrainConfig,
    rates: &[f64],
    decays: &[f64],
    log_dir: Option<&std::path::Path>,
) -> Result<GridOutcome> {
    if rates.is_empty() || decays.is_empty() {
        return Err(Error::Config(
            "the grid needs at least one learning rate and one weight decay".into(),
        ));
    }
    let mut points = Vec::with_capacity(rates.len() * decays.len());
    for &lr in rates {
        for &wd in decays {
            points.push(GridPoint {
                learning_rate: lr,
                weight_decay: wd,
            });
        }
    }

    let results: Vec<Result<GridRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = points
            .iter()
            .enumerate()
            .map(|(i, &point)| {
                let cfg = TrainConfig {
                    learning_rate: point.learning_rate,
                    weight_decay: point.weight_decay,
                    ..base.clone()
                };
                let log_path: Option<PathBuf> = log_dir.map(|d| {
                    d.join(format!(
                        "run_{i:02}_lr{}_wd{}.csv",
                        point.learning_rate, point.weight_decay
                    ))
                });
                scope.spawn(move || -> Result<GridRun> {
                    let (outcome, _model) = train::<T>(
                        dataset,
                        model_cfg,
                        &cfg,
                        log_path.as_deref(),
                        None,
                        |_| {},
                    )?;
                    let last = outcome
                        .history
                        .last()
                        .copied()
                        .ok_or_else(|| Error::Train("a grid run produced no epochs".into()))?;
                    Ok(GridRun {
                        point,
                        outcome,
                        final_val_loss: last.val_loss,
                        final_val_map: last.val_map,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("a grid-search thread panicked"))
            .collect()
    });

    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }
    let best = rank_best(&runs);
    Ok(GridOutcome { runs, best })
}

/// Index of the winning run: highest final val mAP, ties broken by lower
/// final val loss, then by earlier grid position.
fn rank_best(runs: &[GridRun]) -> usize {
    let mut best = 0usize;
    for i in 1..runs.len() {
        let (a, b) = (&runs[i], &runs[best]);
        if a.final_val_map > b.final_val_map
            || (a.final_val_map == b.final_val_map && a.final_val_loss < b.final_val_loss)
        {
            best = i;
        }
    }
    best
}
