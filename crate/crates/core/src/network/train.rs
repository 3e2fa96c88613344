use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::layer::{train_layer_from_moments, NodeModel};
use super::patches::{expand_abs_pow, extract_patches};
use super::{infer_shapes, LayerSpec, Shape, EXPANSION_EXPONENT};
use crate::dataio::LabeledDataset;
use crate::gsfa::{MomentAccumulator, TrainingGraph};
use crate::{DataMatrix, Error, Result};

/// Images per block when streaming through the hierarchy.
const CHUNK_IMAGES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerModel {
    pub spec: LayerSpec,
    pub in_shape: Shape,
    /// Node output shape, before expansion.
    pub out_shape: Shape,
    pub node: NodeModel,
}

impl LayerModel {
    /// Shape handed to the next layer.
    pub fn next_shape(&self) -> Shape {
        if self.spec.expansion_after {
            Shape::new(self.out_shape.height, self.out_shape.width, 2 * self.out_shape.channels)
        } else {
            self.out_shape
        }
    }

    /// Apply the layer to a block of representations, one image per row.
    pub fn forward(&self, rep: ArrayView2<f64>) -> Result<DataMatrix> {
        let n = rep.nrows();
        let (patches, _) = extract_patches(rep, self.in_shape, self.spec.filter_size, self.spec.stride)?;
        let mut y = self.node.apply(patches.view())?;
        if self.spec.expansion_after {
            y = expand_abs_pow(y.view(), EXPANSION_EXPONENT);
        }
        let next = self.next_shape().len();
        Ok(y.into_shape_with_order((n, next))
            .expect("patch rows are image-major"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub input_shape: Shape,
    pub layers: Vec<LayerModel>,
}

impl NetworkModel {
    pub fn output_dim(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input_shape.len(), |l| l.next_shape().len())
    }

    /// Means plus projection matrices over all layers.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.node.parameter_count()).sum()
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Run the first `depth` layers on a block of images.
    fn forward_partial(&self, images: ArrayView2<f64>, depth: usize) -> Result<DataMatrix> {
        let mut rep = images.to_owned();
        for layer in &self.layers[..depth] {
            rep = layer.forward(rep.view())?;
        }
        Ok(rep)
    }
}

/// Greedy bottom-up training.
///
/// For each layer, every training image is pushed through the layers
/// trained so far, cut into patches, and each patch is labelled with its
/// image's class. The class-graph moments of the pooled patches are
/// accumulated in blocks, then the layer's node is solved from them.
pub fn train_network(ds: &LabeledDataset, input_shape: Shape, specs: &[LayerSpec]) -> Result<NetworkModel> {
    let shapes = infer_shapes(input_shape, specs)?;
    if ds.data().ncols() != input_shape.len() {
        return Err(Error::Dimension(format!(
            "images of length {} do not match input shape {}",
            ds.data().ncols(),
            input_shape
        )));
    }
    if ds.len() < 2 {
        return Err(Error::InsufficientData("network training needs at least 2 images".into()));
    }
    let mut net = NetworkModel {
        input_shape,
        layers: Vec::with_capacity(specs.len()),
    };
    for (depth, (spec, shape)) in specs.iter().zip(&shapes).enumerate() {
        let positions = shape.output.height * shape.output.width;
        let patch_labels: Vec<usize> = ds
            .labels()
            .iter()
            .flat_map(|&l| std::iter::repeat(l).take(positions))
            .collect();
        let graph = TrainingGraph::class_clique(&patch_labels)?;
        let patch_dim = spec.filter_size * spec.filter_size * shape.input.channels;

        let mut acc: Option<MomentAccumulator> = None;
        for (k, block) in ds.data().axis_chunks_iter(Axis(0), CHUNK_IMAGES).enumerate() {
            let rep = net.forward_partial(block, depth)?;
            let (patches, _) = extract_patches(rep.view(), shape.input, spec.filter_size, spec.stride)?;
            let acc = acc.get_or_insert_with(|| {
                let shift: Array1<f64> = patches
                    .mean_axis(Axis(0))
                    .unwrap_or_else(|| Array1::zeros(patch_dim));
                MomentAccumulator::new(&graph, shift)
            });
            acc.add_rows(k * CHUNK_IMAGES * positions, patches.view())?;
        }
        let moments = acc.expect("at least one block").finish()?;
        let node = train_layer_from_moments(&moments, spec)
            .map_err(|e| match e {
                Error::Architecture(m) => Error::Architecture(format!("layer {depth}: {m}")),
                other => other,
            })?;
        net.layers.push(LayerModel {
            spec: *spec,
            in_shape: shape.input,
            out_shape: shape.output,
            node,
        });
    }
    Ok(net)
}

/// Features of `images` (one flattened image per row).
pub fn forward(net: &NetworkModel, images: ArrayView2<f64>) -> Result<DataMatrix> {
    if images.ncols() != net.input_shape.len() {
        return Err(Error::Dimension(format!(
            "images of length {} do not match network input {}",
            images.ncols(),
            net.input_shape
        )));
    }
    let mut out = Array2::zeros((images.nrows(), net.output_dim()));
    let mut at = 0;
    for block in images.axis_chunks_iter(Axis(0), CHUNK_IMAGES) {
        let y = net.forward_partial(block, net.layers.len())?;
        out.slice_mut(s![at..at + block.nrows(), ..]).assign(&y);
        at += block.nrows();
    }
    Ok(out)
}
