//! Binary matrix files: 4-byte magic, `u32` rows, `u32` cols, then
//! row-major `f32` values, all little-endian. A dataset cache is one such
//! file (`<name>.dat`, magic `SBDM`) plus a JSON sidecar (`<name>.json`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::{DataMatrix, Error, Result};

pub const MATRIX_MAGIC: [u8; 4] = *b"SBDM";
pub const FEATURE_MAGIC: [u8; 4] = *b"FEAT";

pub fn write_matrix(path: &Path, magic: [u8; 4], m: &DataMatrix) -> Result<()> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::Dimension("too many rows".into()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::Dimension("too many columns".into()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&magic)?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    for &v in m.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path, magic: [u8; 4]) -> Result<DataMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let fmt = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut head = [0u8; 12];
    r.read_exact(&mut head)
        .map_err(|_| fmt("file shorter than the 12-byte header".into()))?;
    if head[..4] != magic {
        return Err(fmt(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&head[..4]),
            String::from_utf8_lossy(&magic)
        )));
    }
    let rows = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| fmt("dimensions overflow".into()))?;
    let mut bytes = Vec::with_capacity(n * 4);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 4 {
        return Err(fmt(format!(
            "payload of {} bytes for a {}x{} matrix",
            bytes.len(),
            rows,
            cols
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

/// JSON sidecar of a dataset cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<(usize, usize)>,
}

fn cache_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.dat")), dir.join(format!("{name}.json")))
}

pub fn write_dataset_cache(
    ds: &LabeledDataset,
    dir: &Path,
    name: &str,
    image_shape: Option<(usize, usize)>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (dat, json) = cache_paths(dir, name);
    write_matrix(&dat, MATRIX_MAGIC, ds.data())?;
    let meta = CacheMeta {
        labels: ds.labels().to_vec(),
        class_names: ds.class_names().to_vec(),
        image_shape,
    };
    let text = serde_json::to_string(&meta).map_err(|e| Error::Persistence(e.to_string()))?;
    std::fs::write(json, text)?;
    Ok(())
}

pub fn read_dataset_cache(dir: &Path, name: &str) -> Result<(LabeledDataset, CacheMeta)> {
    let (dat, json) = cache_paths(dir, name);
    let data = read_matrix(&dat, MATRIX_MAGIC)?;
    let text = std::fs::read_to_string(&json)?;
    let meta: CacheMeta = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: json.clone(),
        msg: e.to_string(),
    })?;
    let ds = LabeledDataset::new(data, meta.labels.clone(), meta.class_names.clone())?;
    Ok((ds, meta))
}
