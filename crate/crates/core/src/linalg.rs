//! Dense least-squares kernels and small symmetric-matrix helpers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on `|R_kk| / |R_00|` below which a pivoted QR declares
/// the design rank deficient.
pub const QR_RANK_TOL: f64 = 1e-10;

/// Threshold on the equilibrated Cholesky pivot (`1 - R²` of a column on the
/// columns before it) below which the normal-equations path declares rank
/// deficiency.
pub const GRAM_RANK_TOL: f64 = 1e-10;

/// Least squares by Householder QR with column pivoting on column norms.
///
/// `a` is column-major `n×p` and is overwritten. Returns the coefficient
/// vector in the original column order.
pub fn qr_least_squares(a: &mut [f64], n: usize, p: usize, y: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * p);
    assert_eq!(y.len(), n);
    if n < p {
        return Err(Error::Design(format!("{n} rows cannot identify {p} columns")));
    }
    let mut rhs = y.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut r_diag = vec![0.0; p];
    let mut lead = 0.0_f64;

    for k in 0..p {
        // pivot on the largest remaining partial column norm
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..p {
            let col = &a[j * n + k..(j + 1) * n];
            let norm: f64 = col.iter().map(|v| v * v).sum();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best != k {
            for r in 0..n {
                a.swap(k * n + r, best * n + r);
            }
            perm.swap(k, best);
        }
        let norm = libm::sqrt(best_norm.max(0.0));
        if k == 0 {
            lead = norm;
        }
        if norm == 0.0 || norm <= QR_RANK_TOL * lead {
            return Err(Error::Rank {
                column: perm[k],
                detail: format!(
                    "pivoted QR diagonal {norm:.3e} relative to leading {lead:.3e} at step {k}"
                ),
            });
        }
        let head = a[k * n + k];
        let alpha = if head > 0.0 { -norm } else { norm };
        a[k * n + k] -= alpha;
        let (left, right) = a.split_at_mut((k + 1) * n);
        let v = &left[k * n + k..];
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv > 0.0 {
            let scale = 2.0 / vtv;
            for j in 0..p - k - 1 {
                let col = &mut right[j * n + k..(j + 1) * n];
                let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                let f = dot * scale;
                for (c, vi) in col.iter_mut().zip(v) {
                    *c -= f * vi;
                }
            }
            let tail = &mut rhs[k..];
            let dot: f64 = v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
            let f = dot * scale;
            for (c, vi) in tail.iter_mut().zip(v) {
                *c -= f * vi;
            }
        }
        r_diag[k] = alpha;
    }

    // back substitution on R (strict upper part lives in `a`)
    let mut z = vec![0.0; p];
    for k in (0..p).rev() {
        let mut acc = rhs[k];
        for j in k + 1..p {
            acc -= a[j * n + k] * z[j];
        }
        z[k] = acc / r_diag[k];
    }
    let mut coef = vec![0.0; p];
    for (k, &col) in perm.iter().enumerate() {
        coef[col] = z[k];
    }
    Ok(coef)
}

/// Solves the normal equations `G θ = c` after unit-diagonal equilibration.
///
/// `gram` is a symmetric `p×p` matrix. Rank deficiency is reported at the
/// first column whose equilibrated pivot falls under [`GRAM_RANK_TOL`].
pub fn gram_solve(gram: &DMatrix<f64>, cross: &DVector<f64>) -> Result<DVector<f64>> {
    let p = gram.nrows();
    let mut scale = DVector::zeros(p);
    for j in 0..p {
        let d = gram[(j, j)];
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Rank {
                column: j,
                detail: "column is identically zero".into(),
            });
        }
        scale[j] = 1.0 / libm::sqrt(d);
    }
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut d = gram[(j, j)] * scale[j] * scale[j];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= GRAM_RANK_TOL {
            return Err(Error::Rank {
                column: j,
                detail: format!("equilibrated Cholesky pivot {d:.3e} (1 - R² on earlier columns)"),
            });
        }
        let djj = libm::sqrt(d);
        l[(j, j)] = djj;
        for i in j + 1..p {
            let mut s = gram[(i, j)] * scale[i] * scale[j];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    let mut w = cross.component_mul(&scale);
    for i in 0..p {
        let mut s = w[i];
        for k in 0..i {
            s -= l[(i, k)] * w[k];
        }
        w[i] = s / l[(i, i)];
    }
    for i in (0..p).rev() {
        let mut s = w[i];
        for k in i + 1..p {
            s -= l[(k, i)] * w[k];
        }
        w[i] = s / l[(i, i)];
    }
    Ok(w.component_mul(&scale))
}

/// Inverse of a symmetric positive definite matrix, with `what` naming it in errors.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let chol = nalgebra::Cholesky::new(symmetrize(m)).ok_or_else(|| Error::Rank {
        column: 0,
        detail: format!("{what} is not positive definite"),
    })?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Rank {
            column: 0,
            detail: format!("{what} is numerically singular"),
        });
    }
    Ok(symmetrize(&inv))
}

/// `(M + Mᵀ) / 2`
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric PSD square root via eigendecomposition, clipping negative
/// eigenvalues at zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite matrix passed to square root".into()));
    }
    let n = sym.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;
    let mut root = DMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k].max(0.0);
        let s = libm::sqrt(lambda);
        let v = eig.eigenvectors.column(k);
        root += (v * v.transpose()) * s;
    }
    Ok(symmetrize(&root))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_hand_solved_3x2() {
        // D = [[1,0],[1,1],[1,2]], y = [1,2,4]
        // DᵀD = [[3,3],[3,5]], Dᵀy = [7,10] → θ = [5/6, 3/2]
        let mut a = vec![1.0, 1.0, 1.0, 0.0, 1.0, 2.0];
        let coef = qr_least_squares(&mut a, 3, 2, &[1.0, 2.0, 4.0]).unwrap();
        assert!((coef[0] - 5.0 / 6.0).abs() < 1e-12);
        assert!((coef[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn qr_duplicate_column_is_rank_error() {
        let mut a = vec![1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0];
        let err = qr_least_squares(&mut a, 4, 2, &[1.0, 0.0, 1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Rank { .. }));
    }

    #[test]
    fn gram_matches_qr() {
        let cols = [[1.0, 1.0, 1.0, 1.0, 1.0], [0.3, -1.2, 2.0, 0.7, 0.1], [1.0, 4.0, 9.0, 16.0, 25.0]];
        let y = [1.0, -2.0, 0.5, 3.0, 2.2];
        let mut a: Vec<f64> = cols.iter().flatten().copied().collect();
        let qr = qr_least_squares(&mut a, 5, 3, &y).unwrap();
        let d = DMatrix::from_fn(5, 3, |r, c| cols[c][r]);
        let g = d.transpose() * &d;
        let c = d.transpose() * DVector::from_column_slice(&y);
        let ne = gram_solve(&g, &c).unwrap();
        for k in 0..3 {
            assert!((qr[k] - ne[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_reports_dependent_column() {
        let d = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 2.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 3.0, 3.0]);
        let g = d.transpose() * &d;
        let c = DVector::from_element(3, 1.0);
        match gram_solve(&g, &c) {
            Err(Error::Rank { column, .. }) => assert_eq!(column, 2),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let r = psd_sqrt(&m).unwrap();
        assert!((&r * &r - &m).abs().max() < 1e-12);
    }
}
