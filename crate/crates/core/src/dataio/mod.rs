//! Dataset ingestion: MNIST IDX files, Omniglot image trees, block-mean
//! resizing, seeded per-class splits and the binary matrix caches.
//!
//! Every intensity produced here is rounded to `f32` precision so that a
//! dataset written to the cache and read back is bit-identical.

mod cache;
mod idx;
mod omniglot;
mod split;

use ndarray::{Array2, Axis};

pub use cache::{
    read_dataset_cache, read_matrix, write_dataset_cache, write_matrix, CacheMeta, FEATURE_MAGIC,
    MATRIX_MAGIC,
};
pub use idx::{load_mnist_idx, parse_idx_images, parse_idx_labels};
pub use omniglot::{load_omniglot, load_omniglot_resized, OmniglotAlphabet, OmniglotCharacter, OmniglotCorpus};
pub use split::{sample_split, Shortfall, Split, SplitSpec};

use crate::{DataMatrix, Error, Result};

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width * height != pixels.len() {
            return Err(Error::Dimension(format!(
                "{}x{} image with {} pixels",
                width,
                height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Request(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Average each `factor × factor` block into one output pixel.
pub fn downsample_block_mean(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor == 0 || img.width % factor != 0 || img.height % factor != 0 {
        return Err(Error::Dimension(format!(
            "factor {} does not divide {}x{}",
            factor, img.width, img.height
        )));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let w = img.width / factor;
    let h = img.height / factor;
    let norm = (factor * factor) as f64;
    let mut out = Vec::with_capacity(w * h);
    for by in 0..h {
        for bx in 0..w {
            let mut sum = 0.0;
            for dy in 0..factor {
                let row = (by * factor + dy) * img.width + bx * factor;
                sum += img.pixels[row..row + factor].iter().sum::<f64>();
            }
            out.push((sum / norm).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(w, h, out)
}

/// Images flattened one per row, with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    data: DataMatrix,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if labels.len() != data.nrows() {
            return Err(Error::Consistency(format!(
                "{} labels for {} rows",
                labels.len(),
                data.nrows()
            )));
        }
        let mut seen = vec![false; class_names.len()];
        for &l in &labels {
            if l >= class_names.len() {
                return Err(Error::Consistency(format!(
                    "label {l} outside a vocabulary of {}",
                    class_names.len()
                )));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Consistency(format!(
                "class '{}' has no samples",
                class_names[missing]
            )));
        }
        Ok(Self {
            data,
            labels,
            class_names,
        })
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Row indices of each class, in row order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_names.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Rows `indices` as a new dataset. Classes absent from the selection are
    /// dropped from the vocabulary and labels renumbered in vocabulary order.
    pub fn select(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let data = self.data.select(Axis(0), indices);
        let mut remap = vec![usize::MAX; self.class_names.len()];
        for &i in indices {
            remap[self.labels[i]] = 0;
        }
        let mut names = Vec::new();
        for (c, slot) in remap.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = names.len();
                names.push(self.class_names[c].clone());
            }
        }
        let labels = indices.iter().map(|&i| remap[self.labels[i]]).collect();
        LabeledDataset::new(data, labels, names)
    }

    /// Rows `indices` keeping the full class vocabulary and label values.
    /// Fails if some class ends up without samples.
    pub fn select_keep_classes(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let data = self.data.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(data, labels, self.class_names.clone())
    }
}

/// Stack equally sized images into a data matrix, one image per row.
pub fn images_to_matrix(images: &[&GrayImage]) -> Result<DataMatrix> {
    let Some(first) = images.first() else {
        return Ok(Array2::zeros((0, 0)));
    };
    let cols = first.pixels.len();
    let mut out = Array2::zeros((images.len(), cols));
    for (mut row, img) in out.rows_mut().into_iter().zip(images) {
        if img.width != first.width || img.height != first.height {
            return Err(Error::Dimension(format!(
                "mixed image sizes {}x{} and {}x{}",
                first.width, first.height, img.width, img.height
            )));
        }
        for (dst, &src) in row.iter_mut().zip(&img.pixels) {
            *dst = src;
        }
    }
    Ok(out)
}
