//! Hierarchical information-preserving graph-based slow feature analysis
//! (HiGSFA) and the data-efficiency evaluation protocol built around it.
//!
//! - [`dataio`]: MNIST IDX and Omniglot ingestion, block-mean resizing,
//!   seeded per-class splits, binary matrix caches.
//! - [`gsfa`]: training graphs, weighted moments, the generalized
//!   eigenproblem behind graph-based SFA, and PCA.
//! - [`network`]: patch-wise GSFA layers with delta-threshold PCA
//!   replacement, the `|x|^0.8` expansion, greedy training and persistence.
//! - [`eval`]: softmax head with adaptive-moment training and early
//!   stopping, 1-NN matching, one-shot episodes and accuracy statistics.
//! - [`linalg`]: dense symmetric eigendecomposition.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod gsfa;
pub mod linalg;
pub mod network;

pub use error::{Error, Result};

/// Rows are samples, columns are features.
pub type DataMatrix = ndarray::Array2<f64>;
