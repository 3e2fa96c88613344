//! One-time conversion of the raw datasets into the binary cache, and
//! loading of the prepared caches.

use std::path::Path;

use higsfa::dataio::{load_mnist_idx, load_omniglot_resized, read_dataset_cache, write_dataset_cache, LabeledDataset};
use higsfa::network::Shape;
use higsfa::DataMatrix;
use ndarray::{concatenate, Axis};

use crate::config::OMNIGLOT_FACTOR;
use crate::error::{BenchError, Result};

pub const MNIST_TRAIN: &str = "mnist_train";
pub const MNIST_TEST: &str = "mnist_test";
pub const OMNIGLOT_BACKGROUND: &str = "omniglot_background";
pub const OMNIGLOT_EVALUATION: &str = "omniglot_evaluation";

const MNIST_FILES: [(&str, &str, &str); 2] = [
    (MNIST_TRAIN, "train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    (MNIST_TEST, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

/// Convert the four uncompressed MNIST IDX files in `mnist_dir`.
pub fn prepare_mnist(mnist_dir: &Path, cache_dir: &Path) -> Result<()> {
    for (name, images, labels) in MNIST_FILES {
        let ds = load_mnist_idx(&mnist_dir.join(images), &mnist_dir.join(labels))?;
        write_dataset_cache(&ds, cache_dir, name, Some((28, 28)))?;
    }
    Ok(())
}

/// Convert `images_background` and `images_evaluation` below `omniglot_dir`,
/// downsampled to 35×35. Returns loader warnings.
pub fn prepare_omniglot(omniglot_dir: &Path, cache_dir: &Path) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    for (name, sub) in [
        (OMNIGLOT_BACKGROUND, "images_background"),
        (OMNIGLOT_EVALUATION, "images_evaluation"),
    ] {
        let root = omniglot_dir.join(sub);
        if !root.is_dir() {
            return Err(BenchError::Preparation {
                what: format!("Omniglot split '{sub}'"),
                dir: omniglot_dir.to_path_buf(),
                hint: "expected <dir>/images_background and <dir>/images_evaluation".into(),
            });
        }
        let corpus = load_omniglot_resized(&root, OMNIGLOT_FACTOR)?;
        warnings.extend(corpus.warnings.iter().cloned());
        let shape = corpus
            .alphabets
            .iter()
            .flat_map(|a| &a.characters)
            .flat_map(|c| &c.samples)
            .next()
            .map(|img| (img.height(), img.width()));
        write_dataset_cache(&corpus.to_dataset()?, cache_dir, name, shape)?;
    }
    Ok(warnings)
}

fn load_cached(cache_dir: &Path, name: &str, hint: &str) -> Result<(LabeledDataset, Shape)> {
    if !cache_dir.join(format!("{name}.dat")).exists() {
        return Err(BenchError::Preparation {
            what: format!("dataset cache '{name}'"),
            dir: cache_dir.to_path_buf(),
            hint: hint.into(),
        });
    }
    let (ds, meta) = read_dataset_cache(cache_dir, name)?;
    let (h, w) = meta.image_shape.ok_or_else(|| BenchError::Preparation {
        what: format!("image shape of '{name}'"),
        dir: cache_dir.to_path_buf(),
        hint: hint.into(),
    })?;
    Ok((ds, Shape::new(h, w, 1)))
}

pub struct MnistData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub shape: Shape,
}

pub fn load_mnist(cache_dir: &Path) -> Result<MnistData> {
    let hint = "run `higsfa prepare --mnist-dir <dir with IDX files> --cache-dir <cache>`";
    let (train, shape) = load_cached(cache_dir, MNIST_TRAIN, hint)?;
    let (test, _) = load_cached(cache_dir, MNIST_TEST, hint)?;
    Ok(MnistData { train, test, shape })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterRows {
    /// Index unique across both splits.
    pub id: usize,
    pub name: String,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphabetRows {
    pub name: String,
    pub characters: Vec<CharacterRows>,
}

/// Both Omniglot splits stacked into one image matrix (background first).
pub struct OmniglotData {
    pub images: DataMatrix,
    pub shape: Shape,
    pub background: Vec<AlphabetRows>,
    pub evaluation: Vec<AlphabetRows>,
}

impl OmniglotData {
    pub fn n_characters(&self) -> usize {
        self.background
            .iter()
            .chain(&self.evaluation)
            .map(|a| a.characters.len())
            .sum()
    }
}

/// Group a dataset whose class names are `alphabet/character`.
fn group_alphabets(ds: &LabeledDataset, row_offset: usize, id_offset: usize) -> Vec<AlphabetRows> {
    let mut alphabets: Vec<AlphabetRows> = Vec::new();
    for (class, rows) in ds.class_indices().into_iter().enumerate() {
        let full = &ds.class_names()[class];
        let (alphabet, character) = full.split_once('/').unwrap_or((full.as_str(), full.as_str()));
        if alphabets.last().map_or(true, |a| a.name != alphabet) {
            alphabets.push(AlphabetRows {
                name: alphabet.to_string(),
                characters: Vec::new(),
            });
        }
        alphabets.last_mut().expect("just pushed").characters.push(CharacterRows {
            id: id_offset + class,
            name: character.to_string(),
            rows: rows.into_iter().map(|r| r + row_offset).collect(),
        });
    }
    alphabets
}

pub fn load_omniglot_cache(cache_dir: &Path) -> Result<OmniglotData> {
    let hint = "run `higsfa prepare --omniglot-dir <dir> --cache-dir <cache>` \
                (or `higsfa synth-omniglot` for the surrogate corpus)";
    let (bg, shape) = load_cached(cache_dir, OMNIGLOT_BACKGROUND, hint)?;
    let (ev, ev_shape) = load_cached(cache_dir, OMNIGLOT_EVALUATION, hint)?;
    if shape != ev_shape {
        return Err(BenchError::Config(format!(
            "Omniglot splits have different image shapes {shape} and {ev_shape}"
        )));
    }
    let images = concatenate(Axis(0), &[bg.data().view(), ev.data().view()])
        .map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(OmniglotData {
        background: group_alphabets(&bg, 0, 0),
        evaluation: group_alphabets(&ev, bg.len(), bg.n_classes()),
        images,
        shape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn alphabets_grouped_with_global_ids_and_rows() {
        let names: Vec<String> = ["a/x", "a/y", "b/z"].iter().map(|s| s.to_string()).collect();
        let labels = vec![0, 0, 1, 2, 1];
        let ds = LabeledDataset::new(Array2::zeros((5, 1)), labels, names).unwrap();
        let groups = group_alphabets(&ds, 100, 7);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].name, "a");
        assert_eq!(groups[0].characters[1].id, 8);
        assert_eq!(groups[0].characters[1].rows, vec![102, 104]);
        assert_eq!(groups[1].characters[0].name, "z");
    }

    #[test]
    fn missing_cache_is_a_preparation_error() {
        let dir = tempfile::tempdir().unwrap();
        match load_mnist(dir.path()) {
            Err(e @ BenchError::Preparation { .. }) => assert!(e.to_string().contains("higsfa prepare")),
            Err(other) => panic!("unexpected error {other}"),
            Ok(_) => panic!("loaded from an empty directory"),
        }
    }
}
