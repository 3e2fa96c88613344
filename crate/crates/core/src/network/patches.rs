use ndarray::{s, Array2, ArrayView2};

use super::Shape;
use crate::{DataMatrix, Error, Result};

/// Position grid of a patch extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn positions(&self) -> usize {
        self.rows * self.cols
    }
}

/// Cut every image (one channels-last image per row of `batch`) into
/// `size × size` patches at `stride`.
///
/// Output rows are ordered image-major, then positions in row-major scan
/// order; each patch is flattened as (dy, dx, channel).
pub fn extract_patches(
    batch: ArrayView2<f64>,
    shape: Shape,
    size: usize,
    stride: usize,
) -> Result<(DataMatrix, PatchGrid)> {
    if batch.ncols() != shape.len() {
        return Err(Error::Dimension(format!(
            "rows of length {} do not hold {} images",
            batch.ncols(),
            shape
        )));
    }
    if size == 0 || stride == 0 || size > shape.height || size > shape.width {
        return Err(Error::Architecture(format!(
            "patch {size} stride {stride} does not fit {shape}"
        )));
    }
    let grid = PatchGrid {
        rows: (shape.height - size) / stride + 1,
        cols: (shape.width - size) / stride + 1,
    };
    let c = shape.channels;
    let run = size * c;
    let width = size * run;
    let mut out = Array2::zeros((batch.nrows() * grid.positions(), width));
    let mut r = 0;
    for img in batch.rows() {
        let img = img.as_slice().map(std::borrow::Cow::Borrowed).unwrap_or_else(|| {
            std::borrow::Cow::Owned(img.to_vec())
        });
        for py in 0..grid.rows {
            for px in 0..grid.cols {
                let mut dst = out.row_mut(r);
                let dst = dst.as_slice_mut().expect("fresh array is contiguous");
                for dy in 0..size {
                    let y = py * stride + dy;
                    let start = (y * shape.width + px * stride) * c;
                    dst[dy * run..(dy + 1) * run].copy_from_slice(&img[start..start + run]);
                }
                r += 1;
            }
        }
    }
    Ok((out, grid))
}

/// Concatenate `|y|^exponent` to the right of `y`.
pub fn expand_abs_pow(y: ArrayView2<f64>, exponent: f64) -> DataMatrix {
    let cols = y.ncols();
    let mut out = Array2::zeros((y.nrows(), 2 * cols));
    out.slice_mut(s![.., ..cols]).assign(&y);
    out.slice_mut(s![.., cols..])
        .zip_mut_with(&y, |dst, &v| *dst = if v == 0.0 { 0.0 } else { v.abs().powf(exponent) });
    out
}
