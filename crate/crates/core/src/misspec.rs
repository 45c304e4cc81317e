//! What a linear interaction coefficient estimates when the true state
//! dependence is nonlinear.
//!
//! With `Y = γ + g(Z) X + u`, the OLS slope on `Z X` equals `∫ ω(z) g′(z) dz`
//! with `ω(z) = Cov(X·1{Z ≥ z}, Z X) / Var(Z X)`, which integrates to one but
//! may change sign.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::monte_carlo::metrics::trapezoid;
use crate::rng::stream_rng;

/// Weight function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCurve {
    pub grid: Vec<f64>,
    pub omega: Vec<f64>,
    /// Trapezoid integral of `omega` over the grid.
    pub integral: f64,
    /// Linearly interpolated zero crossings.
    pub sign_changes: Vec<f64>,
}

impl WeightCurve {
    fn from_values(grid: Vec<f64>, omega: Vec<f64>) -> Self {
        let integral = trapezoid(&grid, &omega);
        let sign_changes = zero_crossings(&grid, &omega);
        Self {
            grid,
            omega,
            integral,
            sign_changes,
        }
    }
}

fn zero_crossings(grid: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..v.len() {
        let (a, b) = (v[k - 1], v[k]);
        if (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0) {
            out.push(grid[k - 1] + (grid[k] - grid[k - 1]) * a / (a - b));
        }
    }
    out
}

/// Plug-in weights from pooled observations `(z_k, x_k)`.
///
/// Moments use the `1/n` normalization on both sides, so it cancels.
pub fn omega_empirical(z: &[f64], x: &[f64], grid: &[f64]) -> Result<WeightCurve> {
    if z.len() != x.len() {
        return Err(Error::Config("state and shock columns differ in length".into()));
    }
    let n = z.len();
    if n < 2 {
        return Err(Error::Degenerate("need at least two observations".into()));
    }
    if z.iter().all(|&v| v == z[0]) {
        return Err(Error::Degenerate("Z is constant, so the weights have no support".into()));
    }
    let nf = n as f64;
    let u: Vec<f64> = z.iter().zip(x).map(|(a, b)| a * b).collect();
    let u_bar = u.iter().sum::<f64>() / nf;
    let var_u = u.iter().map(|v| (v - u_bar) * (v - u_bar)).sum::<f64>() / nf;
    if !(var_u > 0.0) || var_u <= f64::EPSILON * u.iter().map(|v| v * v).sum::<f64>() / nf {
        return Err(Error::Degenerate("Z·X has zero sample variance".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| z[a].total_cmp(&z[b]));
    let sorted_z: Vec<f64> = order.iter().map(|&k| z[k]).collect();
    // suffix sums of X·(ZX) and X over the sorted order
    let mut suf_xu = alloc::vec![0.0; n + 1];
    let mut suf_x = alloc::vec![0.0; n + 1];
    for p in (0..n).rev() {
        let k = order[p];
        suf_xu[p] = suf_xu[p + 1] + x[k] * u[k];
        suf_x[p] = suf_x[p + 1] + x[k];
    }
    let omega = grid
        .iter()
        .map(|&g| {
            let p = sorted_z.partition_point(|&v| v < g);
            (suf_xu[p] / nf - suf_x[p] / nf * u_bar) / var_u
        })
        .collect();
    Ok(WeightCurve::from_values(grid.to_vec(), omega))
}

fn check_example_domain(z: f64) -> Result<()> {
    if !(1.0..=3.0).contains(&z) {
        return Err(Error::Domain(format!("{z} lies outside [1, 3]")));
    }
    Ok(())
}

/// `(15/32)(z − 1)(3 − z)(3z² − 20z + 29)` on `[1, 3]`.
pub fn omega_analytic_example(z: f64) -> Result<f64> {
    check_example_domain(z)?;
    Ok(15.0 / 32.0 * (z - 1.0) * (3.0 - z) * (3.0 * z * z - 20.0 * z + 29.0))
}

/// `(z − 1)(z − 1.5)(z − 2.5)(3 − z)` on `[1, 3]`.
pub fn gprime_analytic_example(z: f64) -> Result<f64> {
    check_example_domain(z)?;
    Ok((z - 1.0) * (z - 1.5) * (z - 2.5) * (3.0 - z))
}

/// Antiderivative of [`gprime_analytic_example`] with the constant used in
/// the worked example.
pub fn g_analytic_example(z: f64) -> Result<f64> {
    check_example_domain(z)?;
    let p = [107.0 / 30.0, -45.0 / 4.0, 27.0 / 2.0, -91.0 / 12.0, 2.0, -0.2];
    Ok(p.iter().rev().fold(0.0, |acc, c| acc * z + c))
}

/// Value of an integral together with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Absolute tolerance used for analytic integrands.
pub const SIMPSON_TOL: f64 = 1e-8;
const SIMPSON_MAX_DEPTH: u32 = 50;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Quadrature(format!("invalid interval [{a}, {b}]")));
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut q = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 3,
    };
    simpson_step(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH, &mut q)?;
    if !q.value.is_finite() {
        return Err(Error::Quadrature("integrand produced a non-finite value".into()));
    }
    Ok(q)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    q: &mut Quadrature,
) -> Result<()> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    q.evaluations += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        q.value += left + right + delta / 15.0;
        q.error += delta.abs() / 15.0;
        return Ok(());
    }
    if depth == 0 || !delta.is_finite() {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] after {} evaluations",
            q.evaluations
        )));
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, q)?;
    simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, q)
}

/// `∫ ω(z) g′(z) dz` over `domain` by adaptive Simpson.
pub fn linear_estimand(
    omega: &mut dyn FnMut(f64) -> Result<f64>,
    gprime: &mut dyn FnMut(f64) -> Result<f64>,
    domain: (f64, f64),
) -> Result<Quadrature> {
    let mut integrand = |z: f64| Ok(omega(z)? * gprime(z)?);
    adaptive_simpson(&mut integrand, domain.0, domain.1, SIMPSON_TOL)
}

/// `∫ ω g′` for weights and derivative sampled on the same grid (trapezoid).
pub fn linear_estimand_on_grid(curve: &WeightCurve, gprime: &[f64]) -> Result<f64> {
    if gprime.len() != curve.grid.len() {
        return Err(Error::Metric("derivative and weight grids differ".into()));
    }
    let prod: Vec<f64> = curve.omega.iter().zip(gprime).map(|(w, d)| w * d).collect();
    Ok(trapezoid(&curve.grid, &prod))
}

/// Slope of the regression of `y` on an intercept and `Z·X`.
pub fn interaction_slope(z: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
    let n = z.len() as f64;
    if z.len() != x.len() || z.len() != y.len() {
        return Err(Error::Config("columns differ in length".into()));
    }
    let u: Vec<f64> = z.iter().zip(x).map(|(a, b)| a * b).collect();
    let u_bar = u.iter().sum::<f64>() / n;
    let y_bar = y.iter().sum::<f64>() / n;
    let sxx: f64 = u.iter().map(|v| (v - u_bar) * (v - u_bar)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("Z·X has zero sample variance".into()));
    }
    let sxy: f64 = u.iter().zip(y).map(|(a, b)| (a - u_bar) * (b - y_bar)).sum();
    Ok(sxy / sxx)
}

/// Draws `n` pairs from the worked-example law `Z ~ U[1, 3]`, `X = 4 − Z`.
///
/// `X` is a deterministic function of `Z`, so these draws are only for
/// checking the weight formula and must not be used for inference.
pub fn simulate_example_law(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(seed, 0);
    let z: Vec<f64> = (0..n).map(|_| 1.0 + 2.0 * rng.random::<f64>()).collect();
    let x = z.iter().map(|v| 4.0 - v).collect();
    (z, x)
}

/// Closed-form summary of the worked example.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleReport {
    pub weights: WeightCurve,
    pub gprime: Vec<f64>,
    pub integrand: Vec<f64>,
    /// Adaptive-Simpson value of `∫ ω`.
    pub omega_integral: Quadrature,
    pub beta: Quadrature,
    /// Intervals of `[1, 3]` on which `g′ > 0`.
    pub gprime_positive_on: Vec<(f64, f64)>,
    /// Exact roots of `ω` inside `(1, 3)`.
    pub omega_roots: Vec<f64>,
}

/// Evaluates the worked example on a grid over `[1, 3]`.
pub fn analytic_example(points: usize) -> Result<ExampleReport> {
    if points < 2 {
        return Err(Error::Config("grid needs at least two points".into()));
    }
    let grid = crate::inference::linspace(1.0, 3.0, points);
    let omega = grid.iter().map(|&z| omega_analytic_example(z)).collect::<Result<Vec<_>>>()?;
    let gprime = grid.iter().map(|&z| gprime_analytic_example(z)).collect::<Result<Vec<_>>>()?;
    let integrand = omega.iter().zip(&gprime).map(|(a, b)| a * b).collect();
    let omega_integral = adaptive_simpson(&mut |z| omega_analytic_example(z), 1.0, 3.0, SIMPSON_TOL)?;
    let beta = linear_estimand(&mut |z| omega_analytic_example(z), &mut |z| gprime_analytic_example(z), (1.0, 3.0))?;
    let s13 = libm::sqrt(13.0);
    Ok(ExampleReport {
        weights: WeightCurve::from_values(grid, omega),
        gprime,
        integrand,
        omega_integral,
        beta,
        gprime_positive_on: alloc::vec![(1.0, 1.5), (2.5, 3.0)],
        omega_roots: alloc::vec![(10.0 - s13) / 3.0],
    })
}
