//! Cubic B-spline sieve with interior knots at empirical quantiles.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DEGREE: usize = 3;
const ORDER: usize = DEGREE + 1;

/// A cubic B-spline basis on `[lo, hi]` with clamped boundary knots.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    /// Dimension asked for by the caller.
    pub requested_dim: usize,
    /// Dimension actually built; smaller than `requested_dim` only when
    /// quantile knots collided and were merged.
    pub dim: usize,
    pub boundary: (f64, f64),
    pub interior_knots: Vec<f64>,
    knots: Vec<f64>,
}

/// Dense evaluation of a basis at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    pub points: Vec<f64>,
    pub dim: usize,
    /// Row-major `points.len() × dim`.
    pub values: Vec<f64>,
}

impl BasisMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }
}

/// Type-7 sample quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Builds the dimension-`dim` basis from a sample of states.
pub fn make_basis(z_sample: &[f64], dim: usize) -> Result<BasisSpec> {
    if z_sample.iter().any(|z| !z.is_finite()) {
        return Err(Error::Basis("state sample contains non-finite values".into()));
    }
    let mut sorted = z_sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    make_basis_sorted(&sorted, dim)
}

/// As [`make_basis`] for a sample that is already sorted ascending.
pub fn make_basis_sorted(sorted: &[f64], dim: usize) -> Result<BasisSpec> {
    if dim < ORDER {
        return Err(Error::Basis(format!("cubic B-spline needs J >= 4, got {dim}")));
    }
    let distinct = 1 + sorted.windows(2).filter(|w| w[1] > w[0]).count();
    if sorted.is_empty() || distinct < dim {
        return Err(Error::Basis(format!(
            "J = {dim} needs at least {dim} distinct states, sample has {}",
            if sorted.is_empty() { 0 } else { distinct }
        )));
    }
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let n_interior = dim - ORDER;
    let mut interior: Vec<f64> = Vec::with_capacity(n_interior);
    for k in 1..=n_interior {
        let q = quantile_sorted(sorted, k as f64 / (n_interior + 1) as f64);
        let inside = q > lo && q < hi;
        let fresh = interior.last().is_none_or(|&last| q > last);
        if inside && fresh {
            interior.push(q);
        }
    }
    let mut knots = Vec::with_capacity(interior.len() + 2 * ORDER);
    knots.extend_from_slice(&[lo; ORDER]);
    knots.extend_from_slice(&interior);
    knots.extend_from_slice(&[hi; ORDER]);
    Ok(BasisSpec {
        requested_dim: dim,
        dim: interior.len() + ORDER,
        boundary: (lo, hi),
        interior_knots: interior,
        knots,
    })
}

impl BasisSpec {
    /// Nonzero basis values at `z` (clamped into the boundary interval):
    /// returns the index of the first nonzero function and the four values.
    #[inline]
    pub fn eval_local(&self, z: f64) -> (usize, [f64; ORDER]) {
        let (lo, hi) = self.boundary;
        let z = z.clamp(lo, hi);
        let last_span = self.dim - 1;
        // span s satisfies knots[s] <= z < knots[s + 1], with z == hi in the last span
        let span = if z >= hi {
            last_span
        } else {
            DEGREE + self.knots[DEGREE + 1..=last_span].partition_point(|&k| k <= z)
        };
        let mut values = [0.0; ORDER];
        let mut left = [0.0; ORDER];
        let mut right = [0.0; ORDER];
        values[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = z - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - z;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        (span - DEGREE, values)
    }

    /// Dense basis row at `z`.
    pub fn eval_row(&self, z: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.dim];
        let (start, vals) = self.eval_local(z);
        row[start..start + ORDER].copy_from_slice(&vals);
        row
    }

    /// Evaluates `phi(z)^T coef`.
    pub fn combine(&self, coef: &[f64], z: f64) -> f64 {
        let (start, vals) = self.eval_local(z);
        vals.iter().zip(&coef[start..start + ORDER]).map(|(v, c)| v * c).sum()
    }
}

/// Evaluates the basis at each point, clamping points outside the boundary.
pub fn eval_basis(spec: &BasisSpec, points: &[f64]) -> Result<BasisMatrix> {
    if points.iter().any(|z| z.is_nan()) {
        return Err(Error::Basis("NaN evaluation point".into()));
    }
    let mut values = vec![0.0; points.len() * spec.dim];
    for (r, &z) in points.iter().enumerate() {
        let (start, vals) = spec.eval_local(z);
        let offset = r * spec.dim + start;
        values[offset..offset + ORDER].copy_from_slice(&vals);
    }
    Ok(BasisMatrix {
        points: points.to_vec(),
        dim: spec.dim,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn j4_has_no_interior_knots() {
        let b = make_basis(&grid(50, 0.0, 1.0), 4).unwrap();
        assert!(b.interior_knots.is_empty());
        assert_eq!(b.dim, 4);
    }

    #[test]
    fn j3_rejected() {
        assert!(matches!(make_basis(&grid(50, 0.0, 1.0), 3), Err(Error::Basis(_))));
    }

    #[test]
    fn too_few_distinct_values() {
        let z = [1.0, 1.0, 2.0, 2.0, 3.0];
        assert!(make_basis(&z, 4).is_err());
        assert!(make_basis(&z, 3).is_err());
    }

    #[test]
    fn bernstein_at_midpoint() {
        let b = make_basis(&grid(11, 0.0, 1.0), 4).unwrap();
        let row = eval_basis(&b, &[0.5]).unwrap();
        let expected = [0.125, 0.375, 0.375, 0.125];
        for (v, e) in row.row(0).iter().zip(expected) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn clamping_matches_boundary() {
        let b = make_basis(&grid(101, -1.0, 2.0), 7).unwrap();
        assert_eq!(b.eval_row(-5.0), b.eval_row(-1.0));
        assert_eq!(b.eval_row(9.0), b.eval_row(2.0));
        let right = b.eval_row(2.0);
        assert_eq!(right[b.dim - 1], 1.0);
    }

    #[test]
    fn nan_rejected() {
        let b = make_basis(&grid(20, 0.0, 1.0), 4).unwrap();
        assert!(eval_basis(&b, &[0.1, f64::NAN]).is_err());
    }

    #[test]
    fn tied_quantiles_are_merged() {
        // 80% of mass at one value: several quantile levels coincide
        let mut z: Vec<f64> = vec![0.5; 80];
        z.extend(grid(20, 0.0, 1.0));
        let b = make_basis(&z, 9).unwrap();
        assert_eq!(b.requested_dim, 9);
        assert!(b.dim < 9);
        assert_eq!(b.dim, b.interior_knots.len() + 4);
        assert!(b.interior_knots.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn type7_quantile() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert!((quantile_sorted(&s, 1.0 / 3.0) - 2.0).abs() < 1e-15);
    }
}
