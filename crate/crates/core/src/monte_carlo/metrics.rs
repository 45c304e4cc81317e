//! Accuracy and band-performance metrics for simulated response curves.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Trapezoid rule for `values` sampled on the increasing `grid`.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(grid.len(), values.len());
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(z, v)| 0.5 * (z[1] - z[0]) * (v[0] + v[1]))
        .sum()
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Metric(format!("{what} has {got} points, grid has {want}")));
    }
    Ok(())
}

/// `∫ (estimate − truth)² dz` by the trapezoid rule.
pub fn integrated_squared_error(estimate: &[f64], truth: &[f64], grid: &[f64]) -> Result<f64> {
    check_len("estimate", estimate.len(), grid.len())?;
    check_len("truth", truth.len(), grid.len())?;
    if grid.len() < 2 {
        return Err(Error::Metric("grid needs at least two points".into()));
    }
    let sq: Vec<f64> = estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).collect();
    Ok(trapezoid(grid, &sq))
}

/// Square root of the mean of per-replication integrated squared errors.
///
/// Equal to `sqrt(∫ mean_r (err_r)² dz)` because the trapezoid rule is linear.
pub fn rimse_from_ise(ise: &[f64]) -> Result<f64> {
    if ise.is_empty() {
        return Err(Error::Metric("no replications to average".into()));
    }
    Ok(libm::sqrt(ise.iter().sum::<f64>() / ise.len() as f64))
}

/// RIMSE of per-replication curves against a common truth on `grid`.
pub fn rimse(curves: &[Vec<f64>], truth: &[f64], grid: &[f64]) -> Result<f64> {
    let ise = curves
        .iter()
        .map(|c| integrated_squared_error(c, truth, grid))
        .collect::<Result<Vec<_>>>()?;
    rimse_from_ise(&ise)
}

/// Whether `truth` lies inside `[lo, hi]` at every point, and the mean width.
pub fn band_summary(lo: &[f64], hi: &[f64], truth: &[f64]) -> Result<(bool, f64)> {
    check_len("band upper edge", hi.len(), lo.len())?;
    check_len("truth", truth.len(), lo.len())?;
    if lo.is_empty() {
        return Err(Error::Metric("empty band".into()));
    }
    let covered = lo.iter().zip(hi).zip(truth).all(|((l, h), t)| l <= t && t <= h);
    let width = hi.iter().zip(lo).map(|(h, l)| h - l).sum::<f64>() / lo.len() as f64;
    Ok((covered, width))
}

/// Simultaneous coverage frequency and average width over replications.
///
/// Each band is a `(lo, hi)` pair on the grid of `truth`.
pub fn coverage_and_width(bands: &[(Vec<f64>, Vec<f64>)], truth: &[f64]) -> Result<(f64, f64)> {
    if bands.is_empty() {
        return Err(Error::Metric("no replications to average".into()));
    }
    let mut hits = 0usize;
    let mut width = 0.0;
    for (lo, hi) in bands {
        let (c, w) = band_summary(lo, hi, truth)?;
        hits += c as usize;
        width += w;
    }
    let r = bands.len() as f64;
    Ok((hits as f64 / r, width / r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_curves_have_zero_rimse() {
        let g = grid(50, -1.0, 2.0);
        let t: Vec<f64> = g.iter().map(|z| z * z).collect();
        assert_eq!(rimse(&[t.clone(), t.clone()], &t, &g).unwrap(), 0.0);
    }

    #[test]
    fn constant_error_closed_form() {
        let g = grid(500, -4.65, 4.65);
        let t = vec![0.3; 500];
        let e = vec![0.3 - 0.25; 500];
        let r = rimse(&[e], &t, &g).unwrap();
        assert!((r - 0.25 * libm::sqrt(9.3)).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_metric_error() {
        let g = grid(5, 0.0, 1.0);
        assert!(matches!(rimse(&[vec![0.0; 4]], &[0.0; 5], &g), Err(Error::Metric(_))));
        assert!(matches!(
            coverage_and_width(&[(vec![0.0; 5], vec![1.0; 4])], &[0.5; 5]),
            Err(Error::Metric(_))
        ));
    }

    #[test]
    fn infinite_bands_cover() {
        let t = vec![1.0, -2.0, 3.0];
        let b = (vec![f64::NEG_INFINITY; 3], vec![f64::INFINITY; 3]);
        assert_eq!(coverage_and_width(&[b], &t).unwrap().0, 1.0);
    }

    #[test]
    fn zero_width_off_truth_misses() {
        let t = vec![1.0, 2.0];
        let b = (vec![0.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(coverage_and_width(&[b], &t).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn three_rep_toy() {
        let t = vec![0.0, 1.0, 2.0];
        let bands = vec![
            (vec![-1.0, 0.0, 1.0], vec![1.0, 2.0, 3.0]),
            (vec![-0.5, 0.5, 1.5], vec![0.5, 1.5, 2.5]),
            // misses only at the last point
            (vec![-1.0, 0.0, 2.5], vec![1.0, 2.0, 3.0]),
        ];
        let (c, w) = coverage_and_width(&bands, &t).unwrap();
        assert!((c - 2.0 / 3.0).abs() < 1e-15);
        let w3 = (2.0 + 2.0 + 0.5) / 3.0;
        assert!((w - (2.0 + 1.0 + w3) / 3.0).abs() < 1e-15);
    }
}
