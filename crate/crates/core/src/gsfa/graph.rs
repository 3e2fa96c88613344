use crate::{Error, Result};

/// Training graph for GSFA: node weights `v(n)` plus a class-clique edge
/// structure where `γ(n, n') = 1` iff both nodes carry the same label.
///
/// Edges are counted over ordered pairs including self-pairs, so
/// `R = Σ_c N_c²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingGraph {
    node_weights: Vec<f64>,
    labels: Vec<usize>,
    class_sizes: Vec<usize>,
    node_weight_sum: f64,
    edge_weight_sum: f64,
    uniform: bool,
}

impl TrainingGraph {
    /// Class-clique graph with unit node weights.
    pub fn class_clique(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Request("training graph needs at least one node".into()));
        }
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut class_sizes = vec![0usize; n_classes];
        for &l in labels {
            class_sizes[l] += 1;
        }
        let edge_weight_sum = class_sizes.iter().map(|&n| (n * n) as f64).sum();
        Ok(Self {
            node_weights: vec![1.0; labels.len()],
            labels: labels.to_vec(),
            class_sizes,
            node_weight_sum: labels.len() as f64,
            edge_weight_sum,
            uniform: true,
        })
    }

    /// Replace the node weights. Weights must be non-negative with a positive sum.
    pub fn with_node_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.labels.len() {
            return Err(Error::Dimension(format!(
                "{} node weights for {} nodes",
                weights.len(),
                self.labels.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Request("node weights must be finite and non-negative".into()));
        }
        let q: f64 = weights.iter().sum();
        if q <= 0.0 {
            return Err(Error::Request("node weights sum to zero".into()));
        }
        self.uniform = weights.iter().all(|&w| w == 1.0);
        self.node_weight_sum = q;
        self.node_weights = weights;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `Q = Σ v(n)`.
    pub fn q(&self) -> f64 {
        self.node_weight_sum
    }

    /// `R = Σ_{n,n'} γ(n, n')`.
    pub fn r(&self) -> f64 {
        self.edge_weight_sum
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    /// Node count per label value; labels that never occur have size 0.
    pub fn class_sizes(&self) -> &[usize] {
        &self.class_sizes
    }

    pub fn n_classes(&self) -> usize {
        self.class_sizes.len()
    }

    pub fn has_uniform_weights(&self) -> bool {
        self.uniform
    }

    pub fn edge_weight(&self, n: usize, m: usize) -> f64 {
        if self.labels[n] == self.labels[m] {
            1.0
        } else {
            0.0
        }
    }
}
