use std::path::PathBuf;

use higsfa::eval::{Challenge, TrainRegime, DEFAULT_WAY};
use higsfa::network::{default_architecture, LayerSpec};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Training-set sizes per class of the MNIST learning curve.
pub const MNIST_SIZES: [usize; 7] = [5, 10, 50, 200, 500, 2000, 6000];
pub const MNIST_TRIALS: usize = 100;
pub const MNIST_VAL_PER_CLASS: usize = 1000;
pub const OMNIGLOT_TRIALS: usize = 20;
pub const OMNIGLOT_EPISODES: usize = 200;
/// Omniglot images are block-mean downsampled by this factor (105 → 35).
pub const OMNIGLOT_FACTOR: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    MnistCurve,
    Omniglot,
}

/// Cartesian grid of Omniglot training-set shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmniglotGrid {
    pub alphabets: Vec<usize>,
    pub chars: Vec<usize>,
    pub samples: Vec<usize>,
    pub challenges: Vec<Challenge>,
    pub episodes: usize,
    pub way: usize,
}

impl Default for OmniglotGrid {
    /// Eight alphabets, a sweep over characters per alphabet.
    fn default() -> Self {
        Self {
            alphabets: vec![8],
            chars: vec![4, 6, 8, 10, 12],
            samples: vec![4, 16],
            challenges: vec![Challenge::Trained, Challenge::UnseenSamples, Challenge::UnseenAlphabets],
            episodes: OMNIGLOT_EPISODES,
            way: DEFAULT_WAY,
        }
    }
}

impl OmniglotGrid {
    /// (alphabets, chars per alphabet, samples per char) in lexicographic order.
    pub fn points(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &a in &self.alphabets {
            for &c in &self.chars {
                for &s in &self.samples {
                    out.push((a, c, s));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Everything needed to re-execute a run; stored with its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Prepared dataset caches.
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    /// MNIST: training samples per class.
    pub sizes: Vec<usize>,
    pub val_per_class: usize,
    pub grid: OmniglotGrid,
    pub trials: usize,
    pub base_seed: u64,
    pub architecture: Vec<LayerSpec>,
    /// The per-trial seed replaces `regime.seed`.
    pub regime: TrainRegime,
    /// Omniglot: precomputed features (one row per cached image) used
    /// instead of training a network.
    pub features: Option<PathBuf>,
    /// Save each trial's trained network under `out_dir/nets`.
    pub save_networks: bool,
}

impl ExperimentConfig {
    pub fn mnist(cache_dir: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            task: Task::MnistCurve,
            cache_dir,
            out_dir,
            sizes: MNIST_SIZES.to_vec(),
            val_per_class: MNIST_VAL_PER_CLASS,
            grid: OmniglotGrid::default(),
            trials: MNIST_TRIALS,
            base_seed: 0,
            architecture: default_architecture(),
            regime: TrainRegime::default(),
            features: None,
            save_networks: false,
        }
    }

    pub fn omniglot(cache_dir: PathBuf, out_dir: PathBuf) -> Self {
        Self {
            task: Task::Omniglot,
            trials: OMNIGLOT_TRIALS,
            ..Self::mnist(cache_dir, out_dir)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.architecture.is_empty() {
            return bad("architecture has no layers".into());
        }
        for spec in &self.architecture {
            spec.validate()?;
        }
        self.regime.validate()?;
        match self.task {
            Task::MnistCurve => {
                if self.sizes.is_empty() || self.sizes.contains(&0) {
                    return bad("sizes must be a non-empty list of positive counts".into());
                }
                if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return bad(format!("sizes must be strictly increasing: {:?}", self.sizes));
                }
            }
            Task::Omniglot => {
                let g = &self.grid;
                let lists = [&g.alphabets, &g.chars, &g.samples];
                if lists.iter().any(|l| l.is_empty() || l.contains(&0)) {
                    return bad("alphabets, chars and samples must be non-empty positive lists".into());
                }
                if g.challenges.is_empty() || g.episodes == 0 || g.way == 0 {
                    return bad("challenges, episodes and way must be non-empty/positive".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::mnist("c".into(), "o".into()).validate().unwrap();
        ExperimentConfig::omniglot("c".into(), "o".into()).validate().unwrap();
    }

    #[test]
    fn rejects_bad_grids() {
        let mut cfg = ExperimentConfig::mnist("c".into(), "o".into());
        cfg.sizes = vec![10, 5];
        assert!(cfg.validate().is_err());
        cfg.sizes = vec![5, 10];
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::omniglot("c".into(), "o".into());
        cfg.grid.chars.push(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_grid_training_set_sizes() {
        let g = OmniglotGrid::default();
        let sizes: Vec<usize> = g.points().iter().map(|(a, c, s)| a * c * s).collect();
        assert_eq!(sizes.iter().max(), Some(&1536));
        assert_eq!(sizes.iter().min(), Some(&128));
    }

    #[test]
    fn snapshot_round_trips() {
        let cfg = ExperimentConfig::omniglot("c".into(), "o".into());
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
