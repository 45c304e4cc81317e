//! Oracle comparisons shared by the property tests and the acceptance target.
//! Each check returns its largest discrepancy.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use state_lp_core::inference::{bartlett_hac, coef_covariance, score_process, sup_critical_value};
use state_lp_core::lp::{build_design, fit_ols_with, schur_b, LpFit, Solver};
use state_lp_core::monte_carlo::{simulate_dgp, DgpSpec};
use state_lp_core::panel::{build_regression_sample, OutcomeMode};
use state_lp_core::selection::LassoProblem;
use state_lp_core::spline::make_basis;

pub fn small_fit(n: usize, t: usize, h: usize, dim: usize, seed: u64, solver: Solver) -> LpFit {
    let spec = DgpSpec {
        burn_in: 30,
        ..DgpSpec::default()
    };
    let panel = simulate_dgp(&spec, n, t, seed).unwrap();
    let sample = build_regression_sample(&panel, h, OutcomeMode::Level, true).unwrap();
    let basis = make_basis(&sample.state_at_base, dim).unwrap();
    fit_ols_with(build_design(&sample, &basis, true).unwrap(), solver).unwrap()
}

pub fn dense(fit: &LpFit) -> DMatrix<f64> {
    DMatrix::from_column_slice(fit.design.n, fit.design.ncols(), &fit.design.dense_column_major())
}

/// `|a − b| / (1 + max(|a|, |b|))`
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Least squares through the SVD, independent of the crate's QR and Cholesky routes.
pub fn svd_ls(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone().svd(true, true).solve(y, 1e-14).unwrap()
}

/// Sieve coefficients from the block formula against a full SVD solve, both solvers.
pub fn schur_vs_ols(seed: u64, h: usize, dim: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for solver in [Solver::Qr, Solver::Gram] {
        let fit = small_fit(15, 25, h, dim, seed, solver);
        let full = svd_ls(&dense(&fit), &DVector::from_column_slice(&fit.design.response));
        let via_schur = schur_b(&fit).unwrap();
        for k in 0..fit.sieve_dim() {
            worst = worst.max(rel(via_schur[k], full[k]));
        }
    }
    worst
}

/// Discrepancies of scores, HAC matrix and coefficient covariance against
/// naive loops: per-period sums of partialled regressors times residuals, a
/// kernel-weighted double sum over period pairs, and an explicit inverse.
/// The covariance error is relative to its largest entry.
pub fn score_hac_cov(seed: u64, h: usize, lag: usize) -> (f64, f64, f64) {
    let fit = small_fit(6, 14, h, 5, seed, Solver::Qr);
    let x = dense(&fit);
    let j = fit.sieve_dim();
    let p = x.ncols();
    let periods = fit.design.n_periods;
    let mut s = DMatrix::zeros(periods, j);
    for r in 0..x.nrows() {
        let t = fit.design.period[r] as usize;
        for a in 0..j {
            let mut ptilde = x[(r, a)];
            for c in 0..p - j {
                ptilde -= fit.partial[(a, c)] * x[(r, j + c)];
            }
            s[(t, a)] += ptilde * fit.residuals[r];
        }
    }
    let scores = score_process(&fit).unwrap();
    let score_err = scores.scores.iter().zip(s.iter()).fold(0.0f64, |m, (a, b)| m.max(rel(*a, *b)));

    let n = fit.n as f64;
    let mut omega = DMatrix::zeros(j, j);
    for t in 0..periods {
        for u in 0..periods {
            let d = t.abs_diff(u);
            if d > lag {
                continue;
            }
            let w = 1.0 - d as f64 / (lag as f64 + 1.0);
            for a in 0..j {
                for b in 0..j {
                    omega[(a, b)] += w * s[(t, a)] * s[(u, b)] / n;
                }
            }
        }
    }
    let hac = bartlett_hac(&scores, Some(lag), fit.n).unwrap();
    let hac_err = hac.omega.iter().zip(omega.iter()).fold(0.0f64, |m, (a, b)| m.max(rel(*a, *b)));

    let inv = fit.schur.clone().try_inverse().unwrap();
    let v = &inv * &omega * inv.transpose() / n;
    let cov = coef_covariance(&hac, &fit).unwrap();
    let scale = v.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let cov_err = cov.v.iter().zip(v.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / scale));
    (score_err, hac_err, cov_err)
}

/// Relative error of the `J = 1` bootstrap quantile against `1.95996 s`.
pub fn scalar_bootstrap(draws: usize, seed: u64) -> f64 {
    let s = 0.7;
    let c = sup_critical_value(&DMatrix::from_element(1, 1, s), draws, 0.05, seed);
    (c / (1.959_963_984_540_054 * s) - 1.0).abs()
}

/// `|Σ_j φ_j(z) − 1|` over the given points.
pub fn partition_of_unity(sample: &[f64], dim: usize, points: &[f64]) -> f64 {
    let basis = make_basis(sample, dim).unwrap();
    points
        .iter()
        .map(|&z| (basis.eval_row(z).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// KKT residual of a LASSO solve on a seeded random design at `frac · λ_max`.
pub fn lasso_kkt(seed: u64, frac: f64) -> f64 {
    let (n, p) = (60, 8);
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let x = DMatrix::from_fn(n, p, |_, _| next());
    let y = DVector::from_fn(n, |i, _| x[(i, 0)] * 2.0 - x[(i, 3)] + 0.3 * next());
    let problem = LassoProblem::new(&(x.transpose() * &x), &(x.transpose() * &y), n);
    let lambda = frac * problem.lambda_max();
    let mut beta = vec![0.0; p];
    let sol = problem.solve(lambda, &mut beta, 1e-12, 1_000_000).unwrap();
    problem.kkt_residual(&sol)
}
