//! Network files.
//!
//! Layout (little-endian): magic `HGSN`, `u32` format version, `u32` header
//! length, a JSON header with specs, shapes and per-node bookkeeping, then
//! the dense matrices, each as `u32` rows, `u32` cols and `f32` values in
//! row-major order.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::layer::{NodeInfo, NodeModel};
use super::train::{LayerModel, NetworkModel};
use super::{LayerSpec, Shape};
use crate::gsfa::{GsfaModel, PcaModel};
use crate::{Error, Result};

pub const NETWORK_FORMAT_VERSION: u32 = 1;
const MAGIC: [u8; 4] = *b"HGSN";

#[derive(Serialize, Deserialize)]
struct Header {
    input_shape: Shape,
    layers: Vec<LayerHeader>,
}

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    spec: LayerSpec,
    in_shape: Shape,
    out_shape: Shape,
    info: NodeInfo,
    slow_deltas: Vec<f64>,
    slow_notes: Vec<String>,
    pca_variances: Option<Vec<f64>>,
    pca_notes: Vec<String>,
    slow_scale: Vec<f64>,
    pca_scale: Vec<f64>,
    has_recon: bool,
}

pub fn save_network(net: &NetworkModel, path: &Path) -> Result<()> {
    let header = Header {
        input_shape: net.input_shape,
        layers: net
            .layers
            .iter()
            .map(|l| LayerHeader {
                spec: l.spec,
                in_shape: l.in_shape,
                out_shape: l.out_shape,
                info: l.node.info.clone(),
                slow_deltas: l.node.slow.deltas.to_vec(),
                slow_notes: l.node.slow.notes.clone(),
                pca_variances: l.node.pca.as_ref().map(|p| p.variances.to_vec()),
                pca_notes: l.node.pca.as_ref().map(|p| p.notes.clone()).unwrap_or_default(),
                slow_scale: l.node.slow_scale.to_vec(),
                pca_scale: l.node.pca_scale.to_vec(),
                has_recon: l.node.recon.is_some(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Persistence(e.to_string()))?;

    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&NETWORK_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for l in &net.layers {
        let node = &l.node;
        put_vector(&mut buf, &node.mean);
        put_matrix(&mut buf, &node.projection);
        put_vector(&mut buf, &node.slow.mean);
        put_matrix(&mut buf, &node.slow.basis);
        if let Some(p) = &node.pca {
            put_vector(&mut buf, &p.mean);
            put_matrix(&mut buf, &p.components);
        }
        if let Some(r) = &node.recon {
            put_matrix(&mut buf, r);
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    f.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<NetworkModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, at: 0 };

    if r.take(4)? != MAGIC {
        return Err(Error::Persistence(format!(
            "{} is not a network file",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != NETWORK_FORMAT_VERSION {
        return Err(Error::Persistence(format!(
            "network file version {version} is not supported (expected version {NETWORK_FORMAT_VERSION})"
        )));
    }
    let len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::Persistence(format!("corrupt header: {e}")))?;

    let mut layers = Vec::with_capacity(header.layers.len());
    for h in header.layers {
        let mean = r.vector()?;
        let projection = r.matrix()?;
        let slow = GsfaModel {
            mean: r.vector()?,
            basis: r.matrix()?,
            deltas: Array1::from(h.slow_deltas),
            notes: h.slow_notes,
        };
        let pca = match h.pca_variances {
            Some(variances) => Some(PcaModel {
                mean: r.vector()?,
                components: r.matrix()?,
                variances: Array1::from(variances),
                notes: h.pca_notes,
            }),
            None => None,
        };
        let recon = if h.has_recon { Some(r.matrix()?) } else { None };
        layers.push(LayerModel {
            spec: h.spec,
            in_shape: h.in_shape,
            out_shape: h.out_shape,
            node: NodeModel {
                slow,
                pca,
                slow_scale: Array1::from(h.slow_scale),
                pca_scale: Array1::from(h.pca_scale),
                recon,
                mean,
                projection,
                info: h.info,
            },
        });
    }
    if r.at != bytes.len() {
        return Err(Error::Persistence(format!(
            "{} trailing bytes after the last layer",
            bytes.len() - r.at
        )));
    }
    Ok(NetworkModel {
        input_shape: header.input_shape,
        layers,
    })
}

fn put_matrix(buf: &mut Vec<u8>, m: &Array2<f64>) {
    buf.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for &v in m.iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn put_vector(buf: &mut Vec<u8>, v: &Array1<f64>) {
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
    for &x in v.iter() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Persistence(format!(
                "file truncated: wanted {} bytes at offset {}, {} available",
                n,
                self.at,
                self.bytes.len() - self.at
            )));
        };
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<Array2<f64>> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Persistence("matrix dimensions overflow".into()))?;
        let raw = self.take(n)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
    }

    fn vector(&mut self) -> Result<Array1<f64>> {
        let m = self.matrix()?;
        if m.nrows() != 1 {
            return Err(Error::Persistence(format!(
                "expected a vector, found a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m.row(0).to_owned())
    }
}
