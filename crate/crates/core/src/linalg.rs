//! Dense symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-style shifts. The transformation matrix is kept
//! transposed during the sweeps so every inner loop walks contiguous memory.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Array2<f64>,
}

/// Eigendecomposition of a symmetric matrix. Only symmetry up to rounding is
/// assumed; the matrix is symmetrized before reduction.
///
/// Equal eigenvalues keep the order in which the QL sweep produced them.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix contains non-finite entries".into()));
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }

    // vt[j * n + k] holds V[k][j]
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            vt[j * n + i] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut vt, &mut d, &mut e);
    ql_implicit(n, &mut vt, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));

    let values = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        let row = &vt[src * n..(src + 1) * n];
        for (k, &v) in row.iter().enumerate() {
            vectors[(k, col)] = v;
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn tridiagonalize(n: usize, vt: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |row: usize, col: usize| col * n + row;

    for j in 0..n {
        d[j] = vt[idx(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for v in &d[..i] {
            scale += v.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = vt[idx(i - 1, j)];
                vt[idx(i, j)] = 0.0;
                vt[idx(j, i)] = 0.0;
            }
        } else {
            for v in &mut d[..i] {
                *v /= scale;
                h += *v * *v;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for v in &mut e[..i] {
                *v = 0.0;
            }

            for j in 0..i {
                f = d[j];
                vt[idx(j, i)] = f;
                g = e[j] + vt[idx(j, j)] * f;
                let col = &vt[j * n..j * n + i];
                for k in (j + 1)..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = &mut vt[j * n..j * n + i];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = vt[idx(i - 1, j)];
                vt[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    // accumulate the Householder reflections
    for i in 0..n - 1 {
        vt[idx(n - 1, i)] = vt[idx(i, i)];
        vt[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = vt[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let (lo, hi) = vt.split_at_mut((i + 1) * n);
                let next = &hi[..=i];
                let col = &mut lo[j * n..j * n + i + 1];
                let g: f64 = next.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            vt[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = vt[idx(n - 1, j)];
        vt[idx(n - 1, j)] = 0.0;
    }
    vt[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn ql_implicit(n: usize, vt: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let max_sweeps = 60 * n.max(1);

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }

        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::Numerical(format!(
                        "QL iteration did not converge for eigenvalue {l}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for v in &mut d[l + 2..n] {
                    *v -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (lo, hi) = vt.split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..];
                    let vi1 = &mut hi[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Flip each column so its largest-magnitude entry is positive; among equal
/// magnitudes the lowest row index decides.
pub fn normalize_column_signs(m: &mut Array2<f64>) {
    for mut col in m.axis_iter_mut(Axis(1)) {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

/// Max-abs residual `‖A v − λ v‖∞` over all eigenpairs.
pub fn max_residual(a: ArrayView2<f64>, eig: &SymmetricEigen) -> f64 {
    let av = a.dot(&eig.vectors);
    let mut worst = 0.0f64;
    for (j, &lambda) in eig.values.iter().enumerate() {
        for i in 0..a.nrows() {
            worst = worst.max((av[(i, j)] - lambda * eig.vectors[(i, j)]).abs());
        }
    }
    worst
}

/// Round every entry to the nearest `f32`, so the matrix survives a trip
/// through the binary on-disk formats unchanged.
pub fn round_to_f32<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> ndarray::Array<f64, D> {
    a.mapv(|v| v as f32 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
        &b + &b.t()
    }

    #[test]
    fn diagonal_matrix() {
        let a = array![[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]];
        let eig = symmetric_eigen(a.view()).unwrap();
        assert_eq!(eig.values.to_vec(), vec![-1.0, 2.0, 3.0]);
        assert!(max_residual(a.view(), &eig) < 1e-14);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let eig = symmetric_eigen(a.view()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn one_by_one_and_empty() {
        let eig = symmetric_eigen(array![[5.0]].view()).unwrap();
        assert_eq!(eig.values[0], 5.0);
        assert_eq!(eig.vectors[(0, 0)].abs(), 1.0);
        let empty = symmetric_eigen(Array2::<f64>::zeros((0, 0)).view()).unwrap();
        assert_eq!(empty.values.len(), 0);
    }

    #[test]
    fn residual_and_orthogonality_on_random_matrices() {
        for (n, seed) in [(5, 1), (17, 2), (64, 3), (150, 4)] {
            let a = random_symmetric(n, seed);
            let eig = symmetric_eigen(a.view()).unwrap();
            let norm = a.iter().map(|v| v.abs()).fold(0.0, f64::max) * n as f64;
            assert!(max_residual(a.view(), &eig) <= 1e-10 * norm);
            let gram = eig.vectors.t().dot(&eig.vectors);
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - target).abs() < 1e-11);
                }
            }
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn rejects_non_square_and_nan() {
        assert!(symmetric_eigen(Array2::<f64>::zeros((2, 3)).view()).is_err());
        let a = array![[1.0, f64::NAN], [f64::NAN, 1.0]];
        assert!(matches!(
            symmetric_eigen(a.view()),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn sign_convention() {
        let mut m = array![[0.5, -0.1], [-0.9, 0.1], [0.2, 0.0]];
        normalize_column_signs(&mut m);
        assert_eq!(m.column(0).to_vec(), vec![-0.5, 0.9, -0.2]);
        // tie at 0.1: row 0 decides
        assert_eq!(m.column(1).to_vec(), vec![0.1, -0.1, 0.0]);
    }
}
