//! Feature export in the `FEAT` matrix format, and the import side used by
//! the `--features` bypass.

use std::path::{Path, PathBuf};

use higsfa::dataio::{read_matrix, write_matrix, FEATURE_MAGIC, MATRIX_MAGIC};
use higsfa::network::{forward, load_network};
use higsfa::DataMatrix;
use ndarray::{concatenate, Axis};

use crate::error::Result;

/// Run every row of the image caches `inputs` (`.dat` matrices, stacked in
/// order) through the saved network and write the features to `out`.
/// Returns (rows, cols).
///
/// The Omniglot cache is background followed by evaluation, so passing both
/// files in that order yields rows aligned with `omniglot --features`.
pub fn export_features(net_path: &Path, inputs: &[PathBuf], out: &Path) -> Result<(usize, usize)> {
    let net = load_network(net_path)?;
    let mut blocks = Vec::with_capacity(inputs.len());
    for input in inputs {
        blocks.push(forward(&net, read_matrix(input, MATRIX_MAGIC)?.view())?);
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let feats = concatenate(Axis(0), &views).map_err(|e| higsfa::Error::Dimension(e.to_string()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_matrix(out, FEATURE_MAGIC, &feats)?;
    Ok(feats.dim())
}

pub fn read_features(path: &Path) -> Result<DataMatrix> {
    Ok(read_matrix(path, FEATURE_MAGIC)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use higsfa::dataio::LabeledDataset;
    use higsfa::network::{save_network, train_network, LayerSpec, Shape};
    use ndarray::{s, Array2};

    #[test]
    fn stacked_inputs_match_per_block_forward() {
        let data = Array2::from_shape_fn((24, 64), |(i, j)| ((i * 7 + j * 3) % 11) as f32 as f64 / 10.0);
        let labels = (0..24).map(|i| i % 3).collect();
        let ds = LabeledDataset::new(data.clone(), labels, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let net = train_network(&ds, Shape::new(8, 8, 1), &[LayerSpec::new(4, 2, 5)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let net_path = dir.path().join("n.hgsn");
        save_network(&net, &net_path).unwrap();
        let first = dir.path().join("a.dat");
        let second = dir.path().join("b.dat");
        write_matrix(&first, MATRIX_MAGIC, &data.slice(s![..10, ..]).to_owned()).unwrap();
        write_matrix(&second, MATRIX_MAGIC, &data.slice(s![10.., ..]).to_owned()).unwrap();

        let out = dir.path().join("f.bin");
        let (rows, cols) = export_features(&net_path, &[first, second], &out).unwrap();
        assert_eq!((rows, cols), (24, 45));
        // blocked and whole-batch gemm can round differently, then f32 storage
        let whole = forward(&net, data.view()).unwrap();
        let got = read_features(&out).unwrap();
        assert_eq!(got.dim(), whole.dim());
        for (a, b) in got.iter().zip(&whole) {
            assert!((a - b).abs() <= 2.0 * f32::EPSILON as f64 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
