use std::path::{Path, PathBuf};

use super::{downsample_block_mean, images_to_matrix, GrayImage, LabeledDataset};
use crate::{Error, Result};

/// Samples per character in the canonical corpus.
pub const SAMPLES_PER_CHARACTER: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OmniglotCharacter {
    pub name: String,
    pub samples: Vec<GrayImage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmniglotAlphabet {
    pub name: String,
    pub characters: Vec<OmniglotCharacter>,
}

/// Omniglot images grouped by alphabet and character.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OmniglotCorpus {
    pub alphabets: Vec<OmniglotAlphabet>,
    /// Non-fatal irregularities found while loading.
    pub warnings: Vec<String>,
}

impl OmniglotCorpus {
    pub fn n_characters(&self) -> usize {
        self.alphabets.iter().map(|a| a.characters.len()).sum()
    }

    /// Flatten into a dataset: one class per character named
    /// `alphabet/character`, rows grouped by class in sample order.
    pub fn to_dataset(&self) -> Result<LabeledDataset> {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        let mut names = Vec::new();
        for alphabet in &self.alphabets {
            for ch in &alphabet.characters {
                if ch.samples.is_empty() {
                    continue;
                }
                let class = names.len();
                names.push(format!("{}/{}", alphabet.name, ch.name));
                for s in &ch.samples {
                    images.push(s);
                    labels.push(class);
                }
            }
        }
        let data = images_to_matrix(&images)?;
        LabeledDataset::new(data, labels, names)
    }
}

/// Load an `<root>/<alphabet>/<character>/<sample>.png` tree at source
/// resolution.
pub fn load_omniglot(root: &Path) -> Result<OmniglotCorpus> {
    load_omniglot_resized(root, 1)
}

/// Load an Omniglot tree, block-mean downsampling every image by `factor`.
///
/// Images are converted to luminance and inverted so strokes are near 1 and
/// background near 0. Directory entries are visited in name order.
pub fn load_omniglot_resized(root: &Path, factor: usize) -> Result<OmniglotCorpus> {
    let mut corpus = OmniglotCorpus::default();
    for alphabet_dir in sorted_dirs(root)? {
        let mut alphabet = OmniglotAlphabet {
            name: file_name(&alphabet_dir),
            characters: Vec::new(),
        };
        for char_dir in sorted_dirs(&alphabet_dir)? {
            let mut ch = OmniglotCharacter {
                name: file_name(&char_dir),
                samples: Vec::new(),
            };
            for file in sorted_files(&char_dir, "png")? {
                let img = decode_inverted(&file)?;
                ch.samples.push(downsample_block_mean(&img, factor)?);
            }
            if ch.samples.len() != SAMPLES_PER_CHARACTER {
                corpus.warnings.push(format!(
                    "{}/{} has {} samples, expected {}",
                    alphabet.name,
                    ch.name,
                    ch.samples.len(),
                    SAMPLES_PER_CHARACTER
                ));
            }
            alphabet.characters.push(ch);
        }
        corpus.alphabets.push(alphabet);
    }
    Ok(corpus)
}

fn decode_inverted(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let luma = img.to_luma8();
    let (w, h) = luma.dimensions();
    let pixels = luma
        .as_raw()
        .iter()
        .map(|&v| (1.0 - v as f32 / 255.0) as f64)
        .collect();
    GrayImage::new(w as usize, h as usize, pixels)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let matches = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case(ext));
        if path.is_file() && matches {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
