//! Dense real-matrix primitives: skew generators, the Cayley transform,
//! DCT rows, Cholesky log-determinants, symmetric eigen-analysis and
//! Gaussian sampling.
//!
//! Everything here is pure and reentrant. Internal logarithms are natural;
//! conversion to bits happens at the reporting boundary.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues in ascending order and
/// orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Rejects matrices containing NaN or infinite entries.
pub fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFiniteEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// (M + Mᵀ)/2; guards eigen/Cholesky inputs against floating-point drift.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// ‖WᵀW − I‖_F, the orthogonality defect of `w`.
pub fn orthogonality_defect(w: &DMatrix<f64>) -> f64 {
    let n = w.ncols();
    (w.transpose() * w - DMatrix::<f64>::identity(n, n)).norm()
}

/// The n×n generator with zero diagonal, `-eps` strictly above and `+eps`
/// strictly below the diagonal. Skew-symmetric by construction.
pub fn skew_matrix(n: usize, eps: f64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidDimension("skew_matrix requires n >= 1".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => -eps,
            Equal => 0.0,
            Greater => eps,
        }
    }))
}

const SKEW_TOL: f64 = 1e-12;

/// W = (I − A)(I + A)⁻¹ for skew-symmetric A; the result is orthogonal
/// with determinant +1. Since (I − A) and (I + A)⁻¹ commute, this is
/// computed as a single LU solve.
pub fn cayley_transform(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    check_finite(a)?;
    let deviation = (a + a.transpose()).norm();
    let scale = a.norm().max(1.0);
    if deviation > SKEW_TOL * scale {
        return Err(Error::NotSkewSymmetric {
            deviation,
            tol: SKEW_TOL,
        });
    }
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    // I + A is always invertible for real skew-symmetric A.
    let lu = (&eye + a).lu();
    lu.solve(&(&eye - a))
        .ok_or_else(|| Error::InvalidSpec("I + A unexpectedly singular".into()))
}

/// First `m` rows of the n-point orthonormal DCT-II matrix:
/// entry (k, j) = c_k cos(πk(2j+1)/(2n)), c_0 = √(1/n), c_k = √(2/n).
pub fn dct_rows(m: usize, n: usize) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 || m > n {
        return Err(Error::InvalidDimension(format!(
            "dct_rows requires 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    let nf = n as f64;
    Ok(DMatrix::from_fn(m, n, |k, j| {
        let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        c * (std::f64::consts::PI * k as f64 * (2 * j + 1) as f64 / (2.0 * nf)).cos()
    }))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
///
/// The input is symmetrized first. A pivot falling below the relative
/// tolerance aborts with the offending pivot value, so callers can see
/// how far from positive definite the matrix was.
pub fn cholesky_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    check_finite(m)?;
    let a = symmetrize(m);
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
    let tol = 1e-12 * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            return Err(Error::SingularMatrix { pivot: d, index: j });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Ok(l)
}

/// log det M (natural log) of a symmetric positive definite matrix,
/// via the Cholesky diagonal.
pub fn logdet_psd(m: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky_factor(m)?;
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

const SYM_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymEig> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    check_finite(m)?;
    let deviation = (m - m.transpose()).norm();
    let scale = m.norm().max(1.0);
    if deviation > SYM_TOL * scale {
        return Err(Error::NotSymmetric {
            deviation,
            tol: SYM_TOL,
        });
    }
    let se = nalgebra::SymmetricEigen::new(symmetrize(m));
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let eigenvalues = DVector::from_fn(n, |i, _| se.eigenvalues[order[i]]);
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// `n` i.i.d. standard normal variates from the given stream.
pub fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn skew_zero_eps_is_zero() {
        let a = skew_matrix(3, 0.0).unwrap();
        assert_eq!(a, DMatrix::zeros(3, 3));
    }

    #[test]
    fn skew_structure_2x2() {
        let a = skew_matrix(2, 0.5).unwrap();
        assert_eq!(a[(0, 0)], 0.0);
        assert_eq!(a[(0, 1)], -0.5);
        assert_eq!(a[(1, 0)], 0.5);
        assert_eq!(a[(1, 1)], 0.0);
    }

    #[test]
    fn skew_is_exactly_antisymmetric() {
        let a = skew_matrix(4, 0.01).unwrap();
        assert_eq!(&a + a.transpose(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn skew_rejects_empty() {
        assert!(matches!(skew_matrix(0, 1.0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn cayley_of_zero_is_identity() {
        let w = cayley_transform(&DMatrix::zeros(5, 5)).unwrap();
        assert_abs_diff_eq!(w, DMatrix::identity(5, 5), epsilon = 1e-14);
    }

    #[test]
    fn cayley_2x2_hand_inverse() {
        // A = [[0,-1],[1,0]]. (I+A) = [[1,-1],[1,1]], inverse = (1/2)[[1,1],[-1,1]].
        // (I-A) = [[1,1],[-1,1]]. W = (I-A)(I+A)^-1 = (1/2)[[0,2],[-2,0]] = [[0,1],[-1,0]].
        let a = skew_matrix(2, 1.0).unwrap();
        let w = cayley_transform(&a).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_abs_diff_eq!(w, expected, epsilon = 1e-14);
    }

    #[test]
    fn cayley_determinant_is_plus_one() {
        for (n, eps) in [(3, 0.2), (5, 0.05), (7, 0.4)] {
            let w = cayley_transform(&skew_matrix(n, eps).unwrap()).unwrap();
            assert_abs_diff_eq!(w.determinant(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn cayley_rejects_non_skew() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            cayley_transform(&m),
            Err(Error::NotSkewSymmetric { .. })
        ));
    }

    #[test]
    fn cayley_rejects_non_square() {
        let m = DMatrix::zeros(2, 3);
        assert!(matches!(cayley_transform(&m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn dct_square_is_orthogonal() {
        let phi = dct_rows(4, 4).unwrap();
        let defect = (&phi * phi.transpose() - DMatrix::identity(4, 4)).norm();
        assert!(defect <= 1e-10);
        let defect_t = (phi.transpose() * &phi - DMatrix::identity(4, 4)).norm();
        assert!(defect_t <= 1e-10);
    }

    #[test]
    fn dct_first_row_is_constant() {
        let phi = dct_rows(1, 10).unwrap();
        for j in 0..10 {
            assert_abs_diff_eq!(phi[(0, j)], 0.1f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn dct_partial_rows_orthonormal() {
        let phi = dct_rows(6, 10).unwrap();
        let defect = (&phi * phi.transpose() - DMatrix::identity(6, 6)).norm();
        assert!(defect <= 1e-10);
    }

    #[test]
    fn dct_rejects_wide() {
        assert!(dct_rows(5, 4).is_err());
    }

    #[test]
    fn logdet_identity_is_zero() {
        assert_eq!(logdet_psd(&DMatrix::identity(5, 5)).unwrap(), 0.0);
    }

    #[test]
    fn logdet_diagonal_oracle() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 8.0]));
        assert_abs_diff_eq!(logdet_psd(&m).unwrap(), 16f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn logdet_2x2_oracle() {
        // det [[2,1],[1,2]] = 3
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_abs_diff_eq!(logdet_psd(&m).unwrap(), 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn logdet_reports_failing_pivot() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match logdet_psd(&m) {
            Err(Error::SingularMatrix { pivot, index }) => {
                assert_eq!(index, 1);
                assert!(pivot.abs() < 1e-10);
            }
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn sym_eig_diagonal_sorted() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eig(&m).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvalues[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvalues[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_offdiagonal_pm_one() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = sym_eig(&m).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvalues[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = symmetrize(&g);
        let e = sym_eig(&m).unwrap();
        let rec = &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues) * e.eigenvectors.transpose();
        assert!((rec - &m).norm() <= 1e-9 * m.norm().max(1.0));
        let vtv = e.eigenvectors.transpose() * &e.eigenvectors;
        assert!((vtv - DMatrix::identity(6, 6)).norm() <= 1e-10);
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn normal_sampling_deterministic() {
        let a = sample_standard_normal(&mut ChaCha8Rng::seed_from_u64(42), 16);
        let b = sample_standard_normal(&mut ChaCha8Rng::seed_from_u64(42), 16);
        assert_eq!(a, b);
    }

    #[test]
    fn normal_sampling_empty() {
        let v = sample_standard_normal(&mut ChaCha8Rng::seed_from_u64(0), 0);
        assert_eq!(v.len(), 0);
    }

    #[test]
    fn normal_sampling_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let v = sample_standard_normal(&mut rng, n);
        let mean = v.mean();
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.01);
    }
}
