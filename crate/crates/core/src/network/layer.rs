use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{Amplitude, LayerSpec, PcaMode, PcaSource};
use crate::gsfa::{
    graph_moments, pca_from_covariance, solve_from_moments, GraphMoments, GsfaModel, LinearFeatures, PcaModel,
    TrainingGraph, DEFAULT_RIDGE,
};
use crate::linalg::{round_to_f32, symmetric_eigen};
use crate::{DataMatrix, Error, Result};

/// PCA variances are floored here before rescaling to unit variance.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Bookkeeping of how a node split its channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub n_slow: usize,
    pub n_pca: usize,
    /// Channels left at zero because the residual had too few directions.
    pub n_padded: usize,
    /// Deltas of all GSFA candidates before any were replaced.
    pub candidate_deltas: Vec<f64>,
    /// Every candidate was too fast; the node is pure PCA.
    pub pure_pca: bool,
    pub notes: Vec<String>,
}

/// A trained node: the kept slow features, the PCA replacement channels and
/// the composed affine map applied to each patch.
///
/// All matrices hold values representable in `f32`, so a saved node reloads
/// bit-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeModel {
    pub slow: GsfaModel,
    pub pca: Option<PcaModel>,
    /// Output multiplier of each kept slow feature.
    pub slow_scale: Array1<f64>,
    /// Output multiplier of each PCA channel.
    pub pca_scale: Array1<f64>,
    /// Least-squares map from kept slow features back to centered patches.
    pub recon: Option<Array2<f64>>,
    /// Patch mean subtracted before projection.
    pub mean: Array1<f64>,
    /// `input_dim × n_features`: slow channels first, then PCA channels.
    pub projection: Array2<f64>,
    pub info: NodeInfo,
}

impl NodeModel {
    pub fn input_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn apply(&self, patches: ArrayView2<f64>) -> Result<DataMatrix> {
        if patches.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "node expects patches of width {}, got {}",
                self.input_dim(),
                patches.ncols()
            )));
        }
        let offset = self.mean.dot(&self.projection);
        Ok(patches.dot(&self.projection) - &offset)
    }

    /// Adaptive parameters of the composed map: the mean plus the projection.
    pub fn parameter_count(&self) -> usize {
        self.mean.len() + self.projection.len()
    }
}

/// Train a node on patches labelled by their source image's class.
pub fn train_layer(
    patches: ArrayView2<f64>,
    patch_labels: &[usize],
    spec: &LayerSpec,
) -> Result<NodeModel> {
    if patch_labels.len() != patches.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} patches",
            patch_labels.len(),
            patches.nrows()
        )));
    }
    let graph = TrainingGraph::class_clique(patch_labels)?;
    let moments = graph_moments(patches, &graph)?;
    train_layer_from_moments(&moments, spec)
}

/// Train a node from the class-graph moments of its pooled patches.
pub fn train_layer_from_moments(moments: &GraphMoments, spec: &LayerSpec) -> Result<NodeModel> {
    spec.validate()?;
    let d = moments.mean.len();
    let j = spec.n_features;
    if j > d {
        return Err(Error::Architecture(format!(
            "{j} features requested from {d}-dimensional patches"
        )));
    }
    let gsfa = solve_from_moments(moments, j, DEFAULT_RIDGE, spec.subspace_tol)?;
    let mut notes = gsfa.notes.clone();

    let n_keep = match spec.pca_mode {
        PcaMode::Threshold { delta_max } => gsfa.deltas.iter().take_while(|&&v| v <= delta_max).count(),
        PcaMode::Fixed { m } => j.saturating_sub(m).min(gsfa.output_dim()),
        PcaMode::None => gsfa.output_dim(),
    };
    let slow = gsfa.truncated(n_keep);
    let n_replace = j - n_keep;
    let pure_pca = n_keep == 0 && matches!(spec.pca_mode, PcaMode::Threshold { .. });
    if pure_pca {
        notes.push("every slow feature exceeded the delta threshold; node is pure PCA".into());
    }

    let cov = &moments.cov;
    let slow_scale = match spec.amplitude {
        Amplitude::Natural => cov
            .dot(&slow.basis)
            .map_axis(Axis(0), |c| c.dot(&c).sqrt()),
        Amplitude::Unit => Array1::ones(n_keep),
    };
    let mut projection = Array2::zeros((d, j));
    projection
        .slice_mut(s![.., ..n_keep])
        .assign(&(&slow.basis * &slow_scale));

    let mut pca = None;
    let mut recon = None;
    let mut pca_scale = Array1::zeros(0);
    let mut n_pca = 0;
    if n_replace > 0 && !matches!(spec.pca_mode, PcaMode::None) {
        // PCA input r = (x - mean) · keep
        let keep = if n_keep > 0 && spec.pca_source == PcaSource::Residual {
            let r = reconstruction(&slow.basis, cov)?;
            let mut keep = Array2::eye(d);
            keep -= &slow.basis.dot(&r);
            recon = Some(r);
            keep
        } else {
            Array2::eye(d)
        };
        let cov_r = keep.t().dot(cov).dot(&keep);
        let model = pca_from_covariance(Array1::zeros(d), cov_r.view(), n_replace, moments.n_samples)?;
        notes.extend(model.notes.iter().cloned());
        n_pca = model.components.ncols();
        pca_scale = match spec.amplitude {
            Amplitude::Natural => Array1::ones(n_pca),
            Amplitude::Unit => model.variances.mapv(|v| 1.0 / v.max(VARIANCE_FLOOR).sqrt()),
        };
        let scaled = &model.components * &pca_scale;
        projection
            .slice_mut(s![.., n_keep..n_keep + n_pca])
            .assign(&keep.dot(&scaled));
        pca = Some(model);
    }
    let n_padded = j - n_keep - n_pca;
    if n_padded > 0 && !matches!(spec.pca_mode, PcaMode::None) {
        notes.push(format!("{n_padded} channels padded with zeros"));
    }

    Ok(NodeModel {
        slow: GsfaModel {
            mean: round_to_f32(&slow.mean),
            basis: round_to_f32(&slow.basis),
            deltas: slow.deltas.clone(),
            notes: slow.notes.clone(),
        },
        pca: pca.map(|p| PcaModel {
            mean: round_to_f32(&p.mean),
            components: round_to_f32(&p.components),
            variances: p.variances,
            notes: p.notes,
        }),
        slow_scale,
        pca_scale,
        recon: recon.map(|r| round_to_f32(&r)),
        mean: round_to_f32(&moments.mean),
        projection: round_to_f32(&projection),
        info: NodeInfo {
            n_slow: n_keep,
            n_pca,
            n_padded,
            candidate_deltas: gsfa.deltas.to_vec(),
            pure_pca,
            notes,
        },
    })
}

/// `R = (Wᵀ C W)⁺ Wᵀ C`, the least-squares map from features `y = x̃ W`
/// back to centered inputs `x̃`.
fn reconstruction(basis: &Array2<f64>, cov: &Array2<f64>) -> Result<Array2<f64>> {
    let cw = cov.dot(basis);
    let gram = basis.t().dot(&cw);
    let eig = symmetric_eigen(gram.view())?;
    let max_ev = eig.values.iter().cloned().fold(0.0, f64::max);
    let mut inv = Array2::zeros(gram.dim());
    for (k, &ev) in eig.values.iter().enumerate() {
        if ev > 1e-12 * max_ev && ev > 0.0 {
            let v = eig.vectors.column(k);
            for a in 0..v.len() {
                for b in 0..v.len() {
                    inv[(a, b)] += v[a] * v[b] / ev;
                }
            }
        }
    }
    Ok(inv.dot(&cw.t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsfa::{apply_linear, fit_pca};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Column 0 is the class index, columns 1.. are noise with decreasing
    /// scale; column 1 has by far the most variance.
    fn class_pure_data(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let scales = [0.0, 10.0, 3.0, 2.0, 1.0];
        let x = Array2::from_shape_fn((n, 5), |(i, j)| {
            if j == 0 {
                labels[i] as f64
            } else {
                scales[j] * gaussian(&mut rng)
            }
        });
        (x, labels)
    }

    #[test]
    fn fixed_zero_is_pure_gsfa() {
        let (x, labels) = class_pure_data(400, 1);
        let spec = LayerSpec::new(1, 1, 3).with_pca_mode(PcaMode::Fixed { m: 0 });
        let node = train_layer(x.view(), &labels, &spec).unwrap();
        assert!(node.pca.is_none());
        assert_eq!(node.info.n_slow, 3);
        assert_eq!(node.output_dim(), 3);
    }

    #[test]
    fn slow_part_finds_class_direction_and_pca_the_loudest_residual() {
        let (x, labels) = class_pure_data(2000, 2);
        let spec = LayerSpec::new(1, 1, 2).with_pca_mode(PcaMode::Fixed { m: 1 });
        let node = train_layer(x.view(), &labels, &spec).unwrap();
        assert_eq!((node.info.n_slow, node.info.n_pca), (1, 1));
        let w = node.slow.basis.column(0);
        let cos = w[0].abs() / w.dot(&w).sqrt();
        assert!(cos > 0.99, "slow cosine {cos}");
        let p = node.pca.as_ref().unwrap().components.column(0);
        let cos = p[1].abs() / p.dot(&p).sqrt();
        assert!(cos > 0.95, "pca cosine {cos}");
    }

    #[test]
    fn threshold_replaces_noise_features() {
        let (x, labels) = class_pure_data(4000, 3);
        let spec = LayerSpec::new(1, 1, 5);
        let node = train_layer(x.view(), &labels, &spec).unwrap();
        assert_eq!(node.info.n_slow + node.info.n_pca + node.info.n_padded, 5);
        for (k, &delta) in node.info.candidate_deltas.iter().enumerate() {
            if k < node.info.n_slow {
                assert!(delta <= 1.99);
            } else {
                assert!(delta > 1.99);
            }
        }
        // the class direction is slow, at least some noise got replaced
        assert!(node.info.n_slow >= 1);
        assert!(node.info.n_pca >= 1);
    }

    fn column_variance(y: &Array2<f64>, k: usize) -> f64 {
        let col = y.column(k);
        let mean = col.mean().unwrap();
        col.mapv(|v| (v - mean) * (v - mean)).mean().unwrap()
    }

    #[test]
    fn natural_amplitude_matches_explained_and_pca_variance() {
        let (x, labels) = class_pure_data(3000, 4);
        let spec = LayerSpec::new(1, 1, 3).with_pca_mode(PcaMode::Fixed { m: 2 });
        let node = train_layer(x.view(), &labels, &spec).unwrap();
        let y = node.apply(x.view()).unwrap();
        // cov(x, y_slow) for a unit-variance slow feature is C w
        let xc = &x - &x.mean_axis(Axis(0)).unwrap();
        let w = node.slow.basis.column(0);
        let cw = xc.t().dot(&xc.dot(&w)) / 3000.0;
        let explained = cw.dot(&cw);
        let got = column_variance(&y, 0);
        assert!((got - explained).abs() < 1e-3 * explained, "{got} vs {explained}");
        let variances = &node.pca.as_ref().unwrap().variances;
        for k in 0..2 {
            let got = column_variance(&y, 1 + k);
            assert!((got - variances[k]).abs() < 1e-3 * variances[k], "{got} vs {}", variances[k]);
        }
    }

    #[test]
    fn unit_amplitude_gives_unit_variance_on_training_patches() {
        let (x, labels) = class_pure_data(3000, 4);
        let spec = LayerSpec::new(1, 1, 4)
            .with_pca_mode(PcaMode::Fixed { m: 2 })
            .with_amplitude(Amplitude::Unit);
        let node = train_layer(x.view(), &labels, &spec).unwrap();
        let y = node.apply(x.view()).unwrap();
        for k in 0..4 {
            let var = column_variance(&y, k);
            assert!((var - 1.0).abs() < 1e-4, "channel {k} variance {var}");
        }
    }

    #[test]
    fn residual_pca_is_orthogonal_to_reconstructed_part() {
        let (x, labels) = class_pure_data(3000, 5);
        let spec = LayerSpec::new(1, 1, 3)
            .with_pca_mode(PcaMode::Fixed { m: 2 })
            .with_pca_source(PcaSource::Residual);
        let node = train_layer(x.view(), &labels, &spec).unwrap();
        let y = node.apply(x.view()).unwrap();
        // pca channels are decorrelated from the slow channel
        let slow = y.column(0);
        for k in 1..3 {
            let c = y.column(k);
            let cov = (&slow - slow.mean().unwrap()).dot(&(&c - c.mean().unwrap())) / 3000.0;
            assert!(cov.abs() < 1e-4, "cov {cov}");
        }
    }

    #[test]
    fn all_fast_degenerates_to_pure_pca() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 3000;
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        let x = Array2::from_shape_fn((n, 3), |_| gaussian(&mut rng));
        let spec = LayerSpec::new(1, 1, 2).with_pca_mode(PcaMode::Threshold { delta_max: 0.5 });
        let node = train_layer(x.view(), &labels, &spec).unwrap();
        assert!(node.info.pure_pca);
        assert_eq!(node.info.n_pca, 2);
        let reference = fit_pca(x.view(), 2).unwrap();
        let ours = node.pca.as_ref().unwrap();
        for k in 0..2 {
            let cos = ours.components.column(k).dot(&reference.components.column(k)).abs();
            assert!(cos > 0.999);
        }
        let _ = apply_linear(ours, x.view()).unwrap();
    }

    #[test]
    fn too_many_features_is_an_architecture_error() {
        let (x, labels) = class_pure_data(50, 7);
        let spec = LayerSpec::new(1, 1, 6);
        assert!(matches!(
            train_layer(x.view(), &labels, &spec),
            Err(Error::Architecture(_))
        ));
    }
}
