//! Benchmark runner: dataset preparation, the MNIST learning curve, the
//! Omniglot challenge grid, result records and reports.

pub mod config;
pub mod error;
pub mod features;
pub mod glyphs;
pub mod mnist;
pub mod omniglot;
pub mod prepare;
pub mod records;
pub mod seeds;

use std::collections::BTreeSet;

use higsfa::eval::GridPoint;

pub use config::{ExperimentConfig, OmniglotGrid, Task};
pub use error::{BenchError, Result};

/// Every grid point a config asks for; the summary has one row for each.
pub fn grid_points(cfg: &ExperimentConfig) -> BTreeSet<GridPoint> {
    match cfg.task {
        Task::MnistCurve => cfg.sizes.iter().map(|&s| GridPoint::mnist(s)).collect(),
        Task::Omniglot => cfg
            .grid
            .points()
            .into_iter()
            .flat_map(|(a, c, s)| {
                cfg.grid
                    .challenges
                    .iter()
                    .map(move |&ch| GridPoint::omniglot(ch, a, c, s))
            })
            .collect(),
    }
}
