//! Weighted covariance and graph difference moments.
//!
//! The difference moment `D = (1/R) Σ γ(n,n') (x_n − x_n')(x_n − x_n')ᵀ` is
//! accumulated per class through
//! `D = (1/R) Σ_c (2 N_c S_c − 2 m_c m_cᵀ)` with `S_c = Σ_{n∈c} x_n x_nᵀ`
//! and `m_c = Σ_{n∈c} x_n`, so rows can be streamed in chunks without ever
//! forming pairs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::TrainingGraph;
use crate::{Error, Result};

/// First and second moments of a sample under a training graph.
#[derive(Debug, Clone)]
pub struct GraphMoments {
    /// Weighted mean `(1/Q) Σ v_n x_n`.
    pub mean: Array1<f64>,
    /// Weighted covariance `(1/Q) Σ v_n (x_n − mean)(x_n − mean)ᵀ`.
    pub cov: Array2<f64>,
    /// Graph difference moment `D`.
    pub diff: Array2<f64>,
    pub n_samples: usize,
}

/// Streaming accumulator for [`GraphMoments`].
///
/// Rows are shifted by a reference vector before accumulation; any value
/// close to the data mean keeps the raw second moments well conditioned.
#[derive(Debug)]
pub struct MomentAccumulator<'g> {
    graph: &'g TrainingGraph,
    shift: Array1<f64>,
    first: Array1<f64>,
    second: Array2<f64>,
    class_second: Array2<f64>,
    class_sums: Array2<f64>,
    seen: Vec<bool>,
    n_seen: usize,
}

impl<'g> MomentAccumulator<'g> {
    pub fn new(graph: &'g TrainingGraph, shift: Array1<f64>) -> Self {
        let d = shift.len();
        Self {
            graph,
            first: Array1::zeros(d),
            second: Array2::zeros((d, d)),
            class_second: Array2::zeros((d, d)),
            class_sums: Array2::zeros((graph.n_classes(), d)),
            seen: vec![false; graph.len()],
            n_seen: 0,
            shift,
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Add rows for nodes `first_node .. first_node + rows.nrows()`.
    pub fn add_rows(&mut self, first_node: usize, rows: ArrayView2<f64>) -> Result<()> {
        let d = self.dim();
        if rows.ncols() != d {
            return Err(Error::Dimension(format!(
                "moment accumulator expects {} columns, got {}",
                d,
                rows.ncols()
            )));
        }
        let end = first_node + rows.nrows();
        if end > self.graph.len() {
            return Err(Error::Dimension(format!(
                "rows for nodes {first_node}..{end} exceed graph size {}",
                self.graph.len()
            )));
        }
        let labels = &self.graph.labels()[first_node..end];
        let weights = &self.graph.node_weights()[first_node..end];
        let sizes = self.graph.class_sizes();

        // group chunk rows by class, preserving row order inside each group
        let mut order: Vec<usize> = (0..rows.nrows()).collect();
        order.sort_by_key(|&i| labels[i]);

        let mut start = 0;
        while start < order.len() {
            let class = labels[order[start]];
            let mut stop = start;
            while stop < order.len() && labels[order[stop]] == class {
                stop += 1;
            }
            let group = &order[start..stop];
            let mut xc = Array2::zeros((group.len(), d));
            for (r, &i) in group.iter().enumerate() {
                let node = first_node + i;
                if self.seen[node] {
                    return Err(Error::Consistency(format!("node {node} added twice")));
                }
                self.seen[node] = true;
                let mut dst = xc.row_mut(r);
                dst.assign(&rows.row(i));
                dst -= &self.shift;
            }
            let sc = xc.t().dot(&xc);
            self.class_second.scaled_add(sizes[class] as f64, &sc);
            let colsum = xc.sum_axis(Axis(0));
            {
                let mut cs = self.class_sums.row_mut(class);
                cs += &colsum;
            }
            if self.graph.has_uniform_weights() {
                self.second += &sc;
                self.first += &colsum;
            } else {
                let mut wx = xc.clone();
                for (r, &i) in group.iter().enumerate() {
                    let w = weights[i];
                    wx.row_mut(r).mapv_inplace(|v| v * w);
                }
                self.second += &wx.t().dot(&xc);
                self.first += &wx.sum_axis(Axis(0));
            }
            start = stop;
        }
        self.n_seen += rows.nrows();
        Ok(())
    }

    pub fn finish(self) -> Result<GraphMoments> {
        if self.n_seen != self.graph.len() {
            return Err(Error::Consistency(format!(
                "moment accumulator saw {} of {} nodes",
                self.n_seen,
                self.graph.len()
            )));
        }
        let q = self.graph.q();
        let r = self.graph.r();
        let centered_mean = &self.first / q;
        let mut cov = &self.second / q;
        let outer = outer(centered_mean.view(), centered_mean.view());
        cov -= &outer;
        symmetrize(&mut cov);

        let mut diff = self.class_second * 2.0;
        let mm = self.class_sums.t().dot(&self.class_sums);
        diff.scaled_add(-2.0, &mm);
        diff /= r;
        symmetrize(&mut diff);

        Ok(GraphMoments {
            mean: &self.shift + &centered_mean,
            cov,
            diff,
            n_samples: self.n_seen,
        })
    }
}

/// Moments of a full data matrix in one call.
pub fn graph_moments(x: ArrayView2<f64>, g: &TrainingGraph) -> Result<GraphMoments> {
    check_rows(x, g)?;
    let shift = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let mut acc = MomentAccumulator::new(g, shift);
    acc.add_rows(0, x)?;
    acc.finish()
}

/// Weighted mean and covariance, computed in two passes.
pub fn weighted_moments(x: ArrayView2<f64>, g: &TrainingGraph) -> Result<(Array1<f64>, Array2<f64>)> {
    check_rows(x, g)?;
    let q = g.q();
    let w = g.node_weights();
    let mut mean = Array1::zeros(x.ncols());
    for (row, &v) in x.rows().into_iter().zip(w) {
        mean.scaled_add(v, &row);
    }
    mean /= q;
    let mut centered = &x - &mean;
    let unweighted = centered.clone();
    for (mut row, &v) in centered.rows_mut().into_iter().zip(w) {
        row *= v;
    }
    let mut cov = centered.t().dot(&unweighted) / q;
    symmetrize(&mut cov);
    Ok((mean, cov))
}

/// `D = (1/R) Σ γ(n,n') (x_n − x_n')(x_n − x_n')ᵀ` via per-class streaming sums.
pub fn graph_diff_moment(x: ArrayView2<f64>, g: &TrainingGraph) -> Result<Array2<f64>> {
    Ok(graph_moments(x, g)?.diff)
}

/// Per-column delta values `Δ_j = (1/R) Σ γ(n,n') (y_j(n) − y_j(n'))²`.
pub fn delta_values(y: ArrayView2<f64>, g: &TrainingGraph) -> Result<Array1<f64>> {
    check_rows(y, g)?;
    let k = g.n_classes();
    let cols = y.ncols();
    let shift = y.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(cols));
    let mut sums = Array2::<f64>::zeros((k, cols));
    let mut squares = Array2::<f64>::zeros((k, cols));
    for (row, &label) in y.rows().into_iter().zip(g.labels()) {
        let mut s = sums.row_mut(label);
        let mut sq = squares.row_mut(label);
        for j in 0..cols {
            let v = row[j] - shift[j];
            s[j] += v;
            sq[j] += v * v;
        }
    }
    let sizes = g.class_sizes();
    let mut out = Array1::zeros(cols);
    for c in 0..k {
        let nc = sizes[c] as f64;
        for j in 0..cols {
            out[j] += 2.0 * nc * squares[(c, j)] - 2.0 * sums[(c, j)] * sums[(c, j)];
        }
    }
    out /= g.r();
    Ok(out)
}

fn check_rows(x: ArrayView2<f64>, g: &TrainingGraph) -> Result<()> {
    if x.nrows() != g.len() {
        return Err(Error::Dimension(format!(
            "{} data rows for a graph with {} nodes",
            x.nrows(),
            g.len()
        )));
    }
    Ok(())
}

pub(crate) fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let a2 = a.insert_axis(Axis(1));
    let b2 = b.insert_axis(Axis(0));
    a2.dot(&b2)
}

pub(crate) fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s};

    fn pairwise_diff(x: ArrayView2<f64>, g: &TrainingGraph) -> Array2<f64> {
        let n = x.nrows();
        let d = x.ncols();
        let mut out = Array2::zeros((d, d));
        for a in 0..n {
            for b in 0..n {
                let w = g.edge_weight(a, b);
                if w == 0.0 {
                    continue;
                }
                let diff = &x.row(a) - &x.row(b);
                out.scaled_add(w, &outer(diff.view(), diff.view()));
            }
        }
        out / g.r()
    }

    #[test]
    fn one_dim_two_points() {
        let x = array![[0.0], [2.0]];
        let g = TrainingGraph::class_clique(&[0, 0]).unwrap();
        let (mean, cov) = weighted_moments(x.view(), &g).unwrap();
        assert_eq!(mean[0], 1.0);
        assert_eq!(cov[(0, 0)], 1.0);
        let d = graph_diff_moment(x.view(), &g).unwrap();
        assert!((d[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singleton_classes_have_zero_diff() {
        let x = array![[1.0, -3.0], [4.0, 0.5]];
        let g = TrainingGraph::class_clique(&[0, 1]).unwrap();
        let d = graph_diff_moment(x.view(), &g).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn repeated_row_has_zero_covariance() {
        let x = Array2::from_shape_fn((6, 3), |(_, j)| j as f64 * 0.7 - 1.0);
        let g = TrainingGraph::class_clique(&[0, 1, 0, 1, 2, 2]).unwrap();
        let (_, cov) = weighted_moments(x.view(), &g).unwrap();
        assert!(cov.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn full_clique_is_twice_covariance() {
        let x = array![
            [0.3, 1.0, -2.0],
            [1.5, -0.2, 0.4],
            [-0.7, 0.9, 1.1],
            [2.2, 0.0, -0.5],
            [0.1, -1.3, 0.8]
        ];
        let g = TrainingGraph::class_clique(&[0; 5]).unwrap();
        let d = graph_diff_moment(x.view(), &g).unwrap();
        let (_, cov) = weighted_moments(x.view(), &g).unwrap();
        let brute = pairwise_diff(x.view(), &g);
        for ((a, b), c) in d.iter().zip(cov.iter()).zip(brute.iter()) {
            assert!((a - 2.0 * b).abs() < 1e-12);
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn chunked_accumulation_matches_single_pass() {
        let x = Array2::from_shape_fn((23, 4), |(i, j)| ((i * 7 + j * 3) % 11) as f64 * 0.37 - 1.0);
        let labels: Vec<usize> = (0..23).map(|i| (i * 5) % 4).collect();
        let g = TrainingGraph::class_clique(&labels).unwrap();
        let whole = graph_moments(x.view(), &g).unwrap();
        let mut acc = MomentAccumulator::new(&g, Array1::zeros(4));
        for (k, chunk) in x.axis_chunks_iter(Axis(0), 6).enumerate() {
            acc.add_rows(k * 6, chunk).unwrap();
        }
        let chunked = acc.finish().unwrap();
        for (a, b) in whole.diff.iter().zip(chunked.diff.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in whole.cov.iter().zip(chunked.cov.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn incomplete_or_duplicate_rows_rejected() {
        let x = array![[1.0], [2.0], [3.0]];
        let g = TrainingGraph::class_clique(&[0, 0, 1]).unwrap();
        let mut acc = MomentAccumulator::new(&g, Array1::zeros(1));
        acc.add_rows(0, x.slice(s![0..2, ..])).unwrap();
        assert!(acc.add_rows(1, x.slice(s![1..2, ..])).is_err());
        assert!(matches!(acc.finish(), Err(Error::Consistency(_))));
        let wrong = array![[1.0, 2.0]];
        let mut acc = MomentAccumulator::new(&g, Array1::zeros(1));
        assert!(acc.add_rows(0, wrong.view()).is_err());
    }

    #[test]
    fn constant_column_has_zero_delta() {
        let y = array![[3.0, 0.0], [3.0, 1.0], [3.0, -1.0], [3.0, 2.0]];
        let g = TrainingGraph::class_clique(&[0, 0, 1, 1]).unwrap();
        let d = delta_values(y.view(), &g).unwrap();
        assert_eq!(d[0], 0.0);
        // class 0: (0-1)^2 twice, class 1: (-1-2)^2 twice; R = 8
        assert!((d[1] - (2.0 + 18.0) / 8.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_mean_uses_node_weights() {
        let x = array![[0.0], [4.0]];
        let g = TrainingGraph::class_clique(&[0, 1])
            .unwrap()
            .with_node_weights(vec![3.0, 1.0])
            .unwrap();
        let (mean, cov) = weighted_moments(x.view(), &g).unwrap();
        assert_eq!(mean[0], 1.0);
        assert_eq!(cov[(0, 0)], (3.0 * 1.0 + 9.0) / 4.0);
        let streamed = graph_moments(x.view(), &g).unwrap();
        assert!((streamed.mean[0] - 1.0).abs() < 1e-15);
        assert!((streamed.cov[(0, 0)] - 3.0).abs() < 1e-14);
    }
}
