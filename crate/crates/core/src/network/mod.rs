//! Hierarchical GSFA network.
//!
//! Each layer cuts its input into `F × F` patches at a fixed stride, pools
//! the patches of every position and image into one training set (so the
//! layer's parameters are shared across positions), and trains a single
//! node on it: the slowest GSFA features, with overly fast ones replaced by
//! the leading PCA channels of the patches. Layers are trained greedily from
//! the input upwards.

mod layer;
mod patches;
mod persist;
mod train;

use serde::{Deserialize, Serialize};

pub use layer::{train_layer, train_layer_from_moments, NodeInfo, NodeModel};
pub use patches::{expand_abs_pow, extract_patches, PatchGrid};
pub use persist::{load_network, save_network, NETWORK_FORMAT_VERSION};
pub use train::{forward, train_network, LayerModel, NetworkModel};

use crate::{Error, Result};

/// Exponent of the `|x|^e` expansion.
pub const EXPANSION_EXPONENT: f64 = 0.8;
/// Features slower than white noise (delta 2) by less than this margin are
/// replaced by PCA channels.
pub const DEFAULT_DELTA_THRESHOLD: f64 = 1.99;
/// GSFA only searches directions holding at least this fraction of the
/// leading patch variance.
pub const DEFAULT_SUBSPACE_TOL: f64 = 3e-3;

/// Height, width and channel count of a channels-last representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.height, self.width, self.channels)
    }
}

/// How a layer picks its PCA replacement channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PcaMode {
    /// Replace every slow feature whose delta exceeds `delta_max`.
    Threshold { delta_max: f64 },
    /// Always replace the `m` fastest slow features.
    Fixed { m: usize },
    /// Pure GSFA layer.
    None,
}

/// What the PCA replacement channels are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaSource {
    /// The centered patches themselves.
    #[default]
    Raw,
    /// Least-squares residual of the centered patches given the kept slow
    /// features.
    Residual,
}

/// Output scale of a node's channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Amplitude {
    /// Each slow channel carries the input standard deviation it explains
    /// (`‖C w‖` for a unit-variance feature `w`); PCA channels keep their
    /// own variance.
    #[default]
    Natural,
    /// Every channel has unit variance on the training patches.
    Unit,
}

fn default_subspace_tol() -> f64 {
    DEFAULT_SUBSPACE_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub filter_size: usize,
    pub stride: usize,
    pub n_features: usize,
    /// Concatenate `|y|^0.8` to the layer output, doubling its channels.
    pub expansion_after: bool,
    pub pca_mode: PcaMode,
    #[serde(default)]
    pub pca_source: PcaSource,
    #[serde(default)]
    pub amplitude: Amplitude,
    /// Relative eigenvalue cut-off of the GSFA search space.
    #[serde(default = "default_subspace_tol")]
    pub subspace_tol: f64,
}

impl LayerSpec {
    pub fn new(filter_size: usize, stride: usize, n_features: usize) -> Self {
        Self {
            filter_size,
            stride,
            n_features,
            expansion_after: false,
            pca_mode: PcaMode::Threshold {
                delta_max: DEFAULT_DELTA_THRESHOLD,
            },
            pca_source: PcaSource::Raw,
            amplitude: Amplitude::Natural,
            subspace_tol: DEFAULT_SUBSPACE_TOL,
        }
    }

    pub fn with_expansion(mut self) -> Self {
        self.expansion_after = true;
        self
    }

    pub fn with_pca_mode(mut self, mode: PcaMode) -> Self {
        self.pca_mode = mode;
        self
    }

    pub fn with_pca_source(mut self, source: PcaSource) -> Self {
        self.pca_source = source;
        self
    }

    pub fn with_amplitude(mut self, amplitude: Amplitude) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_subspace_tol(mut self, tol: f64) -> Self {
        self.subspace_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.filter_size == 0 || self.stride == 0 || self.n_features == 0 {
            return Err(Error::Architecture(format!(
                "filter size, stride and feature count must be positive: {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.subspace_tol) {
            return Err(Error::Architecture(format!(
                "subspace tolerance must lie in [0, 1), got {}",
                self.subspace_tol
            )));
        }
        if let PcaMode::Threshold { delta_max } = self.pca_mode {
            if !(delta_max > 0.0) {
                return Err(Error::Architecture(format!(
                    "delta threshold must be positive, got {delta_max}"
                )));
            }
        }
        Ok(())
    }
}

/// The two-layer architecture: 5×5 stride-2 patches to 25 features with
/// the `|x|^0.8` expansion, then 4×4 stride-2 patches to 16 features, both
/// with a delta threshold of 1.99.
pub fn default_architecture() -> Vec<LayerSpec> {
    vec![
        LayerSpec::new(5, 2, 25).with_expansion(),
        LayerSpec::new(4, 2, 16),
    ]
}

/// Shapes around one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShapes {
    pub input: Shape,
    /// Node output, before any expansion.
    pub output: Shape,
    /// What the next layer sees.
    pub next: Shape,
}

/// Shapes through a stack of layers. The flattened network output size is
/// `shapes.last().next.len()`.
pub fn infer_shapes(input: Shape, specs: &[LayerSpec]) -> Result<Vec<LayerShapes>> {
    let mut current = input;
    let mut out = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        spec.validate()
            .map_err(|e| Error::Architecture(format!("layer {i}: {e}")))?;
        let f = spec.filter_size;
        if f > current.height || f > current.width {
            return Err(Error::Architecture(format!(
                "layer {i}: filter {f} exceeds input {}x{}",
                current.height, current.width
            )));
        }
        let output = Shape::new(
            (current.height - f) / spec.stride + 1,
            (current.width - f) / spec.stride + 1,
            spec.n_features,
        );
        let next = if spec.expansion_after {
            Shape::new(output.height, output.width, 2 * output.channels)
        } else {
            output
        };
        out.push(LayerShapes {
            input: current,
            output,
            next,
        });
        current = next;
    }
    Ok(out)
}

/// Flattened output size of a stack.
pub fn output_len(input: Shape, specs: &[LayerSpec]) -> Result<usize> {
    Ok(infer_shapes(input, specs)?
        .last()
        .map_or(input.len(), |s| s.next.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_shapes() {
        let shapes = infer_shapes(Shape::new(28, 28, 1), &default_architecture()).unwrap();
        assert_eq!(shapes[0].output, Shape::new(12, 12, 25));
        assert_eq!(shapes[0].next, Shape::new(12, 12, 50));
        assert_eq!(shapes[1].output, Shape::new(5, 5, 16));
        assert_eq!(shapes[1].next.len(), 400);
    }

    #[test]
    fn omniglot_shapes() {
        let shapes = infer_shapes(Shape::new(35, 35, 1), &default_architecture()).unwrap();
        assert_eq!(shapes[0].output, Shape::new(16, 16, 25));
        assert_eq!(shapes[0].next, Shape::new(16, 16, 50));
        assert_eq!(shapes[1].output, Shape::new(7, 7, 16));
        assert_eq!(output_len(Shape::new(35, 35, 1), &default_architecture()).unwrap(), 784);
    }

    #[test]
    fn single_patch_layer() {
        for stride in 1..4 {
            let shapes =
                infer_shapes(Shape::new(6, 6, 3), &[LayerSpec::new(6, stride, 7)]).unwrap();
            assert_eq!(shapes[0].output, Shape::new(1, 1, 7));
        }
    }

    #[test]
    fn oversized_filter_names_the_layer() {
        let specs = [LayerSpec::new(5, 2, 4), LayerSpec::new(9, 1, 4)];
        match infer_shapes(Shape::new(12, 12, 1), &specs) {
            Err(Error::Architecture(msg)) => assert!(msg.starts_with("layer 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = LayerSpec::new(3, 1, 2).with_pca_mode(PcaMode::Threshold { delta_max: 0.0 });
        assert!(bad.validate().is_err());
        assert!(LayerSpec::new(3, 0, 2).validate().is_err());
    }

    #[test]
    fn spec_serializes_with_mode_tag() {
        let json = serde_json::to_string(&LayerSpec::new(4, 2, 16)).unwrap();
        assert!(json.contains("\"mode\":\"threshold\""), "{json}");
        let back: LayerSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, LayerSpec::new(4, 2, 16));
    }
}
