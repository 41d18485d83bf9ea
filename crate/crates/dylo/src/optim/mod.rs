//! Optimization: the gradient-descent rule, learning-rate schedule, the
//! training loop, and hyper-parameter grid search.

mod adam;
mod schedule;

pub mod grid;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use grid::{default_grid, grid_search, GridOutcome, GridPoint, GridRun};
pub use schedule::{should_stop_early, PlateauDecay, MIN_RELATIVE_IMPROVEMENT};
pub use train::{train, EpochStats, TrainConfig, TrainOutcome};
