//! IDX files as distributed with MNIST: big-endian magic
//! `0x00 0x00 dtype ndims`, one big-endian `u32` per dimension, then the
//! unsigned-byte payload.

use std::path::Path;

use ndarray::Array2;

use super::LabeledDataset;
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Load an IDX image/label pair. Intensities are scaled by `1/255`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes)
        .map_err(|msg| Error::Format {
            path: images_path.to_path_buf(),
            msg,
        })?;
    let labels = parse_idx_labels(&label_bytes).map_err(|msg| Error::Format {
        path: labels_path.to_path_buf(),
        msg,
    })?;
    if labels.len() != count {
        return Err(Error::Consistency(format!(
            "{} images in {} but {} labels in {}",
            count,
            images_path.display(),
            labels.len(),
            labels_path.display()
        )));
    }
    let dim = rows * cols;
    let data = Array2::from_shape_fn((count, dim), |(i, j)| {
        (pixels[i * dim + j] as f32 / 255.0) as f64
    });
    let n_classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let class_names = (0..n_classes).map(|c| c.to_string()).collect();
    let labels = labels.into_iter().map(usize::from).collect();
    LabeledDataset::new(data, labels, class_names)
}

fn header(bytes: &[u8], expected: u32, what: &str) -> std::result::Result<Vec<usize>, String> {
    if bytes.len() < 4 {
        return Err(format!("{what} file too short for a header ({} bytes)", bytes.len()));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if magic != expected {
        return Err(format!(
            "bad magic number 0x{magic:08x} for {what}, expected 0x{expected:08x}"
        ));
    }
    let ndims = bytes[3] as usize;
    let end = 4 + 4 * ndims;
    if bytes.len() < end {
        return Err(format!("{what} header truncated"));
    }
    Ok((0..ndims)
        .map(|i| {
            let o = 4 + 4 * i;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect())
}

/// Returns `(count, rows, cols, payload)`.
pub fn parse_idx_images(bytes: &[u8]) -> std::result::Result<(usize, usize, usize, &[u8]), String> {
    let dims = header(bytes, IMAGES_MAGIC, "images")?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let start = 16;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or("image dimensions overflow")?;
    if bytes.len() != start + len {
        return Err(format!(
            "payload holds {} bytes, header announces {}",
            bytes.len() - start,
            len
        ));
    }
    Ok((count, rows, cols, &bytes[start..]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> std::result::Result<Vec<u8>, String> {
    let dims = header(bytes, LABELS_MAGIC, "labels")?;
    let count = dims[0];
    if bytes.len() != 8 + count {
        return Err(format!(
            "payload holds {} bytes, header announces {}",
            bytes.len() - 8,
            count
        ));
    }
    Ok(bytes[8..].to_vec())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn encode_images(count: usize, rows: usize, cols: usize, payload: &[u8]) -> Vec<u8> {
        let mut out = IMAGES_MAGIC.to_be_bytes().to_vec();
        for d in [count, rows, cols] {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(payload);
        out
    }

    pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
        let mut out = LABELS_MAGIC.to_be_bytes().to_vec();
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    fn write_pair(dir: &Path, images: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.join("images-idx3-ubyte");
        let lp = dir.join("labels-idx1-ubyte");
        std::fs::write(&ip, images).unwrap();
        std::fs::write(&lp, labels).unwrap();
        (ip, lp)
    }

    #[test]
    fn small_pair_loads() {
        let dir = tempfile::tempdir().unwrap();
        let payload: Vec<u8> = vec![0, 255, 51, 102, 0, 0, 0, 255];
        let (ip, lp) = write_pair(
            dir.path(),
            &encode_images(2, 2, 2, &payload),
            &encode_labels(&[1, 0]),
        );
        let ds = load_mnist_idx(&ip, &lp).unwrap();
        assert_eq!(ds.data().dim(), (2, 4));
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.data()[(0, 1)], 1.0);
        assert_eq!(ds.data()[(0, 2)], (51.0f32 / 255.0) as f64);
    }

    #[test]
    fn zeroed_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut images = encode_images(1, 2, 2, &[0, 1, 2, 3]);
        images[..4].fill(0);
        let (ip, lp) = write_pair(dir.path(), &images, &encode_labels(&[0]));
        let err = load_mnist_idx(&ip, &lp).unwrap_err();
        match err {
            Error::Format { msg, .. } => assert!(msg.contains("0x00000000"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_is_a_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(
            dir.path(),
            &encode_images(2, 1, 1, &[0, 1]),
            &encode_labels(&[0]),
        );
        assert!(matches!(
            load_mnist_idx(&ip, &lp),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn truncated_payload_rejected() {
        let bytes = encode_images(2, 2, 2, &[0; 7]);
        assert!(parse_idx_images(&bytes).is_err());
        assert!(parse_idx_labels(&encode_labels(&[1, 2])[..9]).is_err());
    }

    proptest! {
        #[test]
        fn intensities_stay_in_unit_interval(
            payload in proptest::collection::vec(any::<u8>(), 1..64usize),
        ) {
            let n = payload.len();
            let dir = tempfile::tempdir().unwrap();
            let labels: Vec<u8> = (0..n).map(|i| (i % 3) as u8).collect();
            let (ip, lp) = write_pair(dir.path(), &encode_images(n, 1, 1, &payload), &encode_labels(&labels));
            match load_mnist_idx(&ip, &lp) {
                Ok(ds) => prop_assert!(ds.data().iter().all(|v| (0.0..=1.0).contains(v))),
                // fewer than 3 rows leaves a class unused
                Err(Error::Consistency(_)) => prop_assert!(n < 3),
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
