use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::moments::symmetrize;
use super::LinearFeatures;
use crate::linalg::{normalize_column_signs, symmetric_eigen};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `input_dim × K`, orthonormal columns by decreasing variance.
    pub components: Array2<f64>,
    pub variances: Array1<f64>,
    pub notes: Vec<String>,
}

impl LinearFeatures for PcaModel {
    fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    fn basis(&self) -> &Array2<f64> {
        &self.components
    }
}

/// Principal components of `x` (population covariance).
pub fn fit_pca(x: ArrayView2<f64>, k: usize) -> Result<PcaModel> {
    if x.nrows() == 0 {
        return Err(Error::InsufficientData("PCA on an empty matrix".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;
    let mut cov = centered.t().dot(&centered) / x.nrows() as f64;
    symmetrize(&mut cov);
    pca_from_covariance(mean, cov.view(), k, x.nrows())
}

/// Principal components from a precomputed covariance of `n_samples` rows.
pub fn pca_from_covariance(
    mean: Array1<f64>,
    cov: ArrayView2<f64>,
    k: usize,
    n_samples: usize,
) -> Result<PcaModel> {
    if k == 0 {
        return Err(Error::Request("PCA needs at least one component".into()));
    }
    let d = cov.nrows();
    if mean.len() != d || cov.ncols() != d {
        return Err(Error::Dimension(format!(
            "mean of length {} with {}x{} covariance",
            mean.len(),
            d,
            cov.ncols()
        )));
    }
    let available = d.min(n_samples.saturating_sub(1));
    let mut notes = Vec::new();
    let k_eff = k.min(available);
    if k_eff < k {
        notes.push(format!(
            "components reduced from {k} to {k_eff}: {n_samples} samples in {d} dimensions"
        ));
    }
    let eig = symmetric_eigen(cov)?;
    let mut components = Array2::zeros((d, k_eff));
    let mut variances = Array1::zeros(k_eff);
    for j in 0..k_eff {
        let src = d - 1 - j;
        components.column_mut(j).assign(&eig.vectors.column(src));
        variances[j] = eig.values[src].max(0.0);
    }
    normalize_column_signs(&mut components);
    Ok(PcaModel {
        mean,
        components,
        variances,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller is plenty for test data
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    #[test]
    fn line_in_three_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dir = array![1.0, 2.0, -2.0] / 3.0;
        let x = Array2::from_shape_fn((200, 3), |_| 0.0);
        let mut x = x;
        for mut row in x.rows_mut() {
            let t = gaussian(&mut rng) * 3.0;
            for j in 0..3 {
                row[j] = t * dir[j] + 0.01 * gaussian(&mut rng) + 5.0;
            }
        }
        let pca = fit_pca(x.view(), 1).unwrap();
        let cos = pca.components.column(0).dot(&dir).abs();
        assert!(cos > 0.999, "cosine {cos}");
    }

    #[test]
    fn isotropic_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((20000, 4), |_| gaussian(&mut rng));
        let pca = fit_pca(x.view(), 2).unwrap();
        let gram = pca.components.t().dot(&pca.components);
        assert!((gram[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((gram[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(gram[(0, 1)].abs() < 1e-12);
        let ratio = pca.variances[1] / pca.variances[0];
        assert!(ratio > 0.9 && ratio <= 1.0);
    }

    #[test]
    fn repeated_row_gives_zero_variances() {
        let x = Array2::from_shape_fn((5, 3), |(_, j)| j as f64);
        let pca = fit_pca(x.view(), 2).unwrap();
        assert!(pca.variances.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_components_rejected() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(matches!(fit_pca(x.view(), 0), Err(Error::Request(_))));
    }

    #[test]
    fn rank_reduction_is_recorded() {
        let x = array![[1.0, 2.0, 0.0], [3.0, 4.0, 1.0]];
        let pca = fit_pca(x.view(), 3).unwrap();
        assert_eq!(pca.components.ncols(), 1);
        assert_eq!(pca.notes.len(), 1);
    }

    #[test]
    fn variances_sorted_descending() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scales = [0.5, 3.0, 1.0, 2.0, 0.1];
        let x = Array2::from_shape_fn((500, 5), |(_, j)| scales[j] * gaussian(&mut rng));
        let pca = fit_pca(x.view(), 5).unwrap();
        for w in pca.variances.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }
}
