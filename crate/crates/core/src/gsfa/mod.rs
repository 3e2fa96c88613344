//! Graph-based slow feature analysis over a linear function space.
//!
//! Given a training graph with node weights `v(n)` and edge weights
//! `γ(n, n')`, GSFA finds projections `y_j = (x − x̄)·w_j` minimizing
//! `(1/R) Σ γ(n,n') (y_j(n) − y_j(n'))²` subject to weighted zero mean, unit
//! variance and decorrelation. That is the generalized symmetric
//! eigenproblem `D w = λ C w`; the eigenvalues are the delta values.

mod graph;
mod moments;
mod pca;
mod solver;

use ndarray::{Array1, Array2, ArrayView2};

pub use graph::TrainingGraph;
pub use moments::{
    delta_values, graph_diff_moment, graph_moments, weighted_moments, GraphMoments,
    MomentAccumulator,
};
pub use pca::{fit_pca, pca_from_covariance, PcaModel};
pub use solver::{solve_from_moments, solve_gsfa, GsfaModel, DEFAULT_RIDGE, RANK_TOLERANCE};

use crate::{DataMatrix, Error, Result};

/// An affine feature map `y = (x − mean) · basis`.
pub trait LinearFeatures {
    fn mean(&self) -> &Array1<f64>;
    fn basis(&self) -> &Array2<f64>;

    fn input_dim(&self) -> usize {
        self.basis().nrows()
    }

    fn output_dim(&self) -> usize {
        self.basis().ncols()
    }
}

/// Apply a linear model row-wise.
pub fn apply_linear<M: LinearFeatures + ?Sized>(model: &M, x: ArrayView2<f64>) -> Result<DataMatrix> {
    if x.ncols() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "model expects {} input columns, got {}",
            model.input_dim(),
            x.ncols()
        )));
    }
    Ok((&x - model.mean()).dot(model.basis()))
}
