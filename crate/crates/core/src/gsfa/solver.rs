use ndarray::{s, Array1, Array2, ArrayView2};

use super::moments::{graph_moments, GraphMoments};
use super::{LinearFeatures, TrainingGraph};
use crate::linalg::{normalize_column_signs, symmetric_eigen};
use crate::{Error, Result};

/// Ridge coefficient, relative to the mean covariance eigenvalue.
pub const DEFAULT_RIDGE: f64 = 1e-7;
/// Whitening directions with eigenvalue below this fraction of the largest
/// are discarded.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// A solved linear GSFA problem: `y = (x − mean) · basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct GsfaModel {
    pub mean: Array1<f64>,
    /// `input_dim × output_dim`, columns ordered by delta.
    pub basis: Array2<f64>,
    /// Delta value of each output feature, non-decreasing.
    pub deltas: Array1<f64>,
    /// Set when fewer features than requested survived rank truncation.
    pub notes: Vec<String>,
}

impl GsfaModel {
    /// Keep only the `k` slowest features.
    pub fn truncated(&self, k: usize) -> GsfaModel {
        let k = k.min(self.output_dim());
        GsfaModel {
            mean: self.mean.clone(),
            basis: self.basis.slice(s![.., ..k]).to_owned(),
            deltas: self.deltas.slice(s![..k]).to_owned(),
            notes: self.notes.clone(),
        }
    }
}

impl LinearFeatures for GsfaModel {
    fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    fn basis(&self) -> &Array2<f64> {
        &self.basis
    }
}

/// Solve GSFA for a linear function space on `x` under graph `g`, returning
/// the `n_features` slowest features.
pub fn solve_gsfa(
    x: ArrayView2<f64>,
    g: &TrainingGraph,
    n_features: usize,
    reg: f64,
) -> Result<GsfaModel> {
    if n_features == 0 {
        return Err(Error::Request("at least one output feature required".into()));
    }
    if n_features > x.ncols() {
        return Err(Error::Request(format!(
            "{} features requested from {}-dimensional input",
            n_features,
            x.ncols()
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::InsufficientData(format!(
            "GSFA needs at least 2 samples, got {}",
            x.nrows()
        )));
    }
    let moments = graph_moments(x, g)?;
    solve_from_moments(&moments, n_features, reg, RANK_TOLERANCE)
}

/// Generalized eigenproblem `D w = λ C w` from precomputed moments.
///
/// Only directions whose (unregularized) covariance eigenvalue is at least
/// `rank_tol` times the largest take part; `RANK_TOLERANCE` merely drops
/// numerically null directions, larger values restrict the search to the
/// leading principal subspace.
pub fn solve_from_moments(
    m: &GraphMoments,
    n_features: usize,
    reg: f64,
    rank_tol: f64,
) -> Result<GsfaModel> {
    let d = m.mean.len();
    if n_features == 0 || n_features > d {
        return Err(Error::Request(format!(
            "{n_features} features requested from {d}-dimensional input"
        )));
    }
    if !(reg >= 0.0) {
        return Err(Error::Request(format!("ridge must be non-negative, got {reg}")));
    }
    if !(0.0..1.0).contains(&rank_tol) {
        return Err(Error::Request(format!("rank tolerance must lie in [0, 1), got {rank_tol}")));
    }
    let trace: f64 = m.cov.diag().sum();
    if !(trace > 0.0) {
        return Err(Error::Degenerate(
            "input covariance is zero, nothing to extract".into(),
        ));
    }

    let mut c = m.cov.clone();
    let ridge = reg * trace / d as f64;
    for i in 0..d {
        c[(i, i)] += ridge;
    }
    let ceig = symmetric_eigen(c.view())?;
    // The rank test looks at the eigenvalues without the ridge: exact null
    // directions (e.g. overlapping linear channels) would otherwise survive
    // whitening and masquerade as perfectly slow features.
    let raw = ceig.values.mapv(|v| v - ridge);
    let max_ev = raw[d - 1];
    let kept: Vec<usize> = (0..d)
        .filter(|&i| raw[i] >= rank_tol * max_ev && raw[i] > 0.0)
        .collect();
    let rank = kept.len();

    let mut whitening = Array2::zeros((d, rank));
    for (col, &i) in kept.iter().enumerate() {
        let scale = 1.0 / ceig.values[i].sqrt();
        whitening
            .column_mut(col)
            .assign(&(&ceig.vectors.column(i) * scale));
    }
    let white_diff = whitening.t().dot(&m.diff).dot(&whitening);
    let deig = symmetric_eigen(white_diff.view())?;

    let out = n_features.min(rank);
    let mut notes = Vec::new();
    if out < n_features {
        notes.push(format!(
            "output reduced from {n_features} to {out} features: {rank} usable directions"
        ));
    }
    let mut basis = whitening.dot(&deig.vectors.slice(s![.., ..out]));
    normalize_column_signs(&mut basis);
    let deltas = deig.values.slice(s![..out]).mapv(|v| v.max(0.0));

    Ok(GsfaModel {
        mean: m.mean.clone(),
        basis,
        deltas,
        notes,
    })
}
