use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub per_class_train: usize,
    pub per_class_val: usize,
    pub seed: u64,
    /// Take every sample of a class that is smaller than `per_class_train`
    /// instead of failing; the shortfall is recorded.
    #[serde(default)]
    pub cap_train: bool,
}

impl SplitSpec {
    pub fn new(per_class_train: usize, per_class_val: usize, seed: u64) -> Self {
        Self {
            per_class_train,
            per_class_val,
            seed,
            cap_train: false,
        }
    }
}

/// A class that could not supply the requested number of samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub class: String,
    pub part: String,
    pub requested: usize,
    pub taken: usize,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: LabeledDataset,
    pub val: Option<LabeledDataset>,
    pub rest: Option<LabeledDataset>,
    /// Source row indices of each part, ascending.
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
    pub rest_rows: Vec<usize>,
    pub shortfalls: Vec<Shortfall>,
}

/// Seeded per-class split into disjoint train / validation / rest parts.
///
/// Each class's row indices are shuffled with a ChaCha8 stream seeded from
/// `spec.seed`; the first `per_class_train` go to training, the next (up to)
/// `per_class_val` to validation and the remainder to `rest`. Parts keep the
/// full class vocabulary; `val` and `rest` are `None` when empty.
pub fn sample_split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    if spec.per_class_train == 0 {
        return Err(Error::Request("per_class_train must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train_rows = Vec::new();
    let mut val_rows = Vec::new();
    let mut rest_rows = Vec::new();
    let mut shortfalls = Vec::new();

    for (class, mut rows) in ds.class_indices().into_iter().enumerate() {
        let name = &ds.class_names()[class];
        let n_train = if rows.len() < spec.per_class_train {
            if !spec.cap_train {
                return Err(Error::InsufficientData(format!(
                    "class '{}' has {} samples, {} requested for training",
                    name,
                    rows.len(),
                    spec.per_class_train
                )));
            }
            shortfalls.push(Shortfall {
                class: name.clone(),
                part: "train".into(),
                requested: spec.per_class_train,
                taken: rows.len(),
            });
            rows.len()
        } else {
            spec.per_class_train
        };
        rows.shuffle(&mut rng);
        let n_val = spec.per_class_val.min(rows.len() - n_train);
        if n_val < spec.per_class_val {
            shortfalls.push(Shortfall {
                class: name.clone(),
                part: "val".into(),
                requested: spec.per_class_val,
                taken: n_val,
            });
        }
        train_rows.extend_from_slice(&rows[..n_train]);
        val_rows.extend_from_slice(&rows[n_train..n_train + n_val]);
        rest_rows.extend_from_slice(&rows[n_train + n_val..]);
    }
    train_rows.sort_unstable();
    val_rows.sort_unstable();
    rest_rows.sort_unstable();

    let part = |rows: &[usize]| -> Result<Option<LabeledDataset>> {
        if rows.is_empty() {
            Ok(None)
        } else {
            ds.select(rows).map(Some)
        }
    };
    Ok(Split {
        train: ds.select_keep_classes(&train_rows)?,
        val: part(&val_rows)?,
        rest: part(&rest_rows)?,
        train_rows,
        val_rows,
        rest_rows,
        shortfalls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy(sizes: &[usize]) -> LabeledDataset {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat(c).take(n))
            .collect();
        let data = Array2::from_shape_fn((labels.len(), 1), |(i, _)| i as f64);
        let names = (0..sizes.len()).map(|c| format!("c{c}")).collect();
        LabeledDataset::new(data, labels, names).unwrap()
    }

    #[test]
    fn parts_are_disjoint_and_cover_each_class() {
        let ds = toy(&[3, 5, 4]);
        let split = sample_split(&ds, &SplitSpec::new(3, 0, 17)).unwrap();
        assert_eq!(split.train_rows.len(), 9);
        assert!(split.val_rows.is_empty());
        // only the surplus of the two larger classes remains
        let rest_labels: Vec<usize> = split.rest_rows.iter().map(|&i| ds.labels()[i]).collect();
        assert_eq!(rest_labels.iter().filter(|&&l| l == 0).count(), 0);
        assert_eq!(rest_labels.iter().filter(|&&l| l == 1).count(), 2);
        assert_eq!(rest_labels.iter().filter(|&&l| l == 2).count(), 1);
        let mut all: Vec<usize> = split
            .train_rows
            .iter()
            .chain(&split.rest_rows)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_split() {
        let ds = toy(&[10, 10]);
        let a = sample_split(&ds, &SplitSpec::new(3, 2, 5)).unwrap();
        let b = sample_split(&ds, &SplitSpec::new(3, 2, 5)).unwrap();
        assert_eq!(a.train_rows, b.train_rows);
        assert_eq!(a.val_rows, b.val_rows);
        let c = sample_split(&ds, &SplitSpec::new(3, 2, 6)).unwrap();
        assert_ne!(a.train_rows, c.train_rows);
    }

    #[test]
    fn validation_is_capped_with_shortfall() {
        let ds = toy(&[4, 10]);
        let split = sample_split(&ds, &SplitSpec::new(2, 5, 1)).unwrap();
        assert_eq!(split.val_rows.len(), 2 + 5);
        assert_eq!(split.shortfalls.len(), 1);
        assert_eq!(split.shortfalls[0].class, "c0");
        assert_eq!(split.shortfalls[0].taken, 2);
    }

    #[test]
    fn small_class_is_an_error_naming_it() {
        let ds = toy(&[5, 2]);
        match sample_split(&ds, &SplitSpec::new(3, 0, 1)) {
            Err(Error::InsufficientData(msg)) => assert!(msg.contains("c1")),
            other => panic!("unexpected {other:?}"),
        }
        let mut spec = SplitSpec::new(3, 0, 1);
        spec.cap_train = true;
        let split = sample_split(&ds, &spec).unwrap();
        assert_eq!(split.train_rows.len(), 5);
        assert_eq!(split.shortfalls[0].part, "train");
    }
}
