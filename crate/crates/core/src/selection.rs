//! Choice of the sieve dimension per horizon: AIC, GCV, cross-validated
//! LASSO, or a fixed value.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lp::{build_design, fit_ols_with, LpFit, Solver};
use crate::panel::RegressionSample;
use crate::spline::make_basis_sorted;

/// Default AIC/GCV search set `{4, …, 20}`.
pub fn default_candidates() -> Vec<usize> {
    (4..=20).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitOptions {
    pub with_intermediate: bool,
    pub solver: Solver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorKind {
    Aic,
    Gcv,
    Lasso,
    Oracle,
}

impl SelectorKind {
    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::Aic => "aic",
            SelectorKind::Gcv => "gcv",
            SelectorKind::Lasso => "lasso",
            SelectorKind::Oracle => "oracle",
        }
    }
}

/// Tuning of the cross-validated LASSO selector.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoOptions {
    /// Dimension of the over-complete basis.
    pub max_dim: usize,
    /// Number of contiguous time-block folds.
    pub folds: usize,
    pub n_lambdas: usize,
    /// Smallest λ on the grid relative to the smallest λ that zeroes every coefficient.
    pub lambda_min_ratio: f64,
    /// Stop when the largest standardized coefficient change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            max_dim: 50,
            folds: 5,
            n_lambdas: 50,
            lambda_min_ratio: 1e-4,
            tol: 1e-7,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    Aic(Vec<usize>),
    Gcv(Vec<usize>),
    Lasso(LassoOptions),
    Oracle(usize),
}

impl Selector {
    pub fn kind(&self) -> SelectorKind {
        match self {
            Selector::Aic(_) => SelectorKind::Aic,
            Selector::Gcv(_) => SelectorKind::Gcv,
            Selector::Lasso(_) => SelectorKind::Lasso,
            Selector::Oracle(_) => SelectorKind::Oracle,
        }
    }
}

/// Criterion value (or skip reason) for one candidate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub requested: usize,
    /// Dimension after merging tied knots.
    pub dim: usize,
    pub n_params: usize,
    pub ssr: Option<f64>,
    pub criterion: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoTrace {
    pub max_dim: usize,
    pub folds: usize,
    pub lambdas: Vec<f64>,
    /// Nonzero sieve-block coefficients along the full-sample path.
    pub nonzero_sieve: Vec<usize>,
    /// Mean out-of-fold squared error per λ.
    pub cv_loss: Vec<f64>,
    pub lambda_hat: f64,
    /// Number of nonzero sieve coefficients at `lambda_hat` (before flooring).
    pub nonzero_at_hat: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub selector: SelectorKind,
    pub j_hat: usize,
    pub candidates: Vec<CandidateScore>,
    pub lasso: Option<LassoTrace>,
}

fn sorted_states(sample: &RegressionSample) -> Vec<f64> {
    let mut z = sample.state_at_base.clone();
    z.sort_unstable_by(f64::total_cmp);
    z
}

/// Fits the sieve LP with a basis of dimension `dim` built on the sample's states.
pub fn fit_dimension(sample: &RegressionSample, dim: usize, opts: FitOptions) -> Result<LpFit> {
    fit_dimension_sorted(sample, &sorted_states(sample), dim, opts)
}

fn fit_dimension_sorted(
    sample: &RegressionSample,
    sorted: &[f64],
    dim: usize,
    opts: FitOptions,
) -> Result<LpFit> {
    let basis = make_basis_sorted(sorted, dim)?;
    let design = build_design(sample, &basis, opts.with_intermediate)?;
    fit_ols_with(design, opts.solver)
}

#[derive(Clone, Copy)]
enum Criterion {
    Aic,
    Gcv,
}

fn search(
    sample: &RegressionSample,
    candidates: &[usize],
    opts: FitOptions,
    criterion: Criterion,
) -> Result<(SelectionResult, LpFit)> {
    if candidates.is_empty() {
        return Err(Error::Selection("empty candidate set".into()));
    }
    if let Some(&bad) = candidates.iter().find(|&&j| j < 4) {
        return Err(Error::Selection(format!("candidate J = {bad} is below 4")));
    }
    let sorted = sorted_states(sample);
    let n = sample.n() as f64;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, LpFit)> = None;
    for &requested in candidates {
        let mut score = CandidateScore {
            requested,
            dim: requested,
            n_params: 0,
            ssr: None,
            criterion: None,
            skipped: None,
        };
        match fit_dimension_sorted(sample, &sorted, requested, opts) {
            Ok(fit) => {
                let k = fit.n_params() as f64;
                score.dim = fit.sieve_dim();
                score.n_params = fit.n_params();
                score.ssr = Some(fit.ssr);
                let value = match criterion {
                    Criterion::Aic => Some(n * libm::log(fit.ssr / n) + 2.0 * k),
                    Criterion::Gcv if k < n => {
                        let shrink = 1.0 - k / n;
                        Some(fit.ssr / (n * shrink * shrink))
                    }
                    Criterion::Gcv => None,
                };
                match value {
                    Some(v) if v.is_finite() => {
                        score.criterion = Some(v);
                        // strict improvement keeps the smaller J on ties
                        if best.as_ref().is_none_or(|(b, _)| v < *b) {
                            best = Some((v, fit));
                        }
                    }
                    Some(_) => score.skipped = Some("non-finite criterion".into()),
                    None => score.skipped = Some("K_J >= n".into()),
                }
            }
            Err(err) => score.skipped = Some(err.to_string()),
        }
        scores.push(score);
    }
    let Some((_, fit)) = best else {
        return Err(Error::Selection("every candidate dimension was skipped".into()));
    };
    let selector = match criterion {
        Criterion::Aic => SelectorKind::Aic,
        Criterion::Gcv => SelectorKind::Gcv,
    };
    Ok((
        SelectionResult {
            selector,
            j_hat: fit.sieve_dim(),
            candidates: scores,
            lasso: None,
        },
        fit,
    ))
}

/// `argmin_J  n log(SSR_J / n) + 2 K_J`
pub fn select_aic(
    sample: &RegressionSample,
    candidates: &[usize],
    opts: FitOptions,
) -> Result<SelectionResult> {
    search(sample, candidates, opts, Criterion::Aic).map(|(s, _)| s)
}

/// `argmin_J  SSR_J / (n (1 - K_J/n)²)`
pub fn select_gcv(
    sample: &RegressionSample,
    candidates: &[usize],
    opts: FitOptions,
) -> Result<SelectionResult> {
    search(sample, candidates, opts, Criterion::Gcv).map(|(s, _)| s)
}

pub fn select_oracle(j_fixed: usize) -> Result<SelectionResult> {
    if j_fixed < 4 {
        return Err(Error::Selection(format!("oracle J = {j_fixed} is below 4")));
    }
    Ok(SelectionResult {
        selector: SelectorKind::Oracle,
        j_hat: j_fixed,
        candidates: Vec::new(),
        lasso: None,
    })
}

/// Runs a selector and returns the final fit at the chosen dimension.
pub fn select_and_fit(
    sample: &RegressionSample,
    selector: &Selector,
    opts: FitOptions,
) -> Result<(SelectionResult, LpFit)> {
    match selector {
        Selector::Aic(c) => search(sample, c, opts, Criterion::Aic),
        Selector::Gcv(c) => search(sample, c, opts, Criterion::Gcv),
        Selector::Oracle(j) => {
            let mut sel = select_oracle(*j)?;
            let fit = fit_dimension(sample, *j, opts)?;
            sel.j_hat = fit.sieve_dim();
            Ok((sel, fit))
        }
        Selector::Lasso(o) => {
            let sel = select_lasso(sample, o, opts)?;
            let fit = fit_dimension(sample, sel.j_hat, opts)?;
            Ok((sel, fit))
        }
    }
}

/// Dimension used for the unpenalized refit after LASSO selection.
pub fn lasso_refit_dim(nonzero: usize) -> usize {
    nonzero.max(4)
}

/// Standardized LASSO problem built from second moments.
///
/// With column scales `s_j = sqrt(G_jj / n)` the objective is
/// `½ βᵀ G̃ β − c̃ᵀβ + λ ‖β‖₁`, `G̃ = G / (n s sᵀ)`, `c̃ = c / (n s)`, which is
/// `(1/2n) ‖y − D̃β‖² + λ‖β‖₁` up to a constant. Coefficients on the original
/// scale are `θ_j = β_j / s_j`.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub lambda: f64,
    /// Standardized coefficients β.
    pub coef_std: Vec<f64>,
    /// Original-scale coefficients θ.
    pub coef: Vec<f64>,
    /// `c̃ − G̃β`, the standardized correlation of each column with the residual.
    pub gradient: Vec<f64>,
    pub sweeps: usize,
}

impl LassoProblem {
    pub fn new(gram: &DMatrix<f64>, cross: &DVector<f64>, n: usize) -> Self {
        let p = gram.nrows();
        let n = n as f64;
        let scale: Vec<f64> = (0..p).map(|j| libm::sqrt((gram[(j, j)] / n).max(0.0))).collect();
        let inv = |s: f64| if s > 0.0 { 1.0 / s } else { 0.0 };
        let g = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] * inv(scale[i]) * inv(scale[j]) / n);
        let c = DVector::from_fn(p, |j, _| cross[j] * inv(scale[j]) / n);
        Self {
            gram: g,
            cross: c,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// Smallest λ at which every coefficient is zero.
    pub fn lambda_max(&self) -> f64 {
        self.cross.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Cyclic coordinate descent from the warm start `beta` (standardized).
    pub fn solve(
        &self,
        lambda: f64,
        beta: &mut [f64],
        tol: f64,
        max_sweeps: usize,
    ) -> Result<LassoSolution> {
        let p = self.dim();
        let mut grad: Vec<f64> = (0..p)
            .map(|j| {
                self.cross[j] - (0..p).map(|k| self.gram[(j, k)] * beta[k]).sum::<f64>()
            })
            .collect();
        let mut sweeps = 0;
        loop {
            if sweeps >= max_sweeps {
                return Err(Error::Convergence {
                    sweeps,
                    lambda,
                });
            }
            sweeps += 1;
            let mut max_delta: f64 = 0.0;
            for j in 0..p {
                let gjj = self.gram[(j, j)];
                if gjj <= 0.0 {
                    continue;
                }
                let z = grad[j] + gjj * beta[j];
                let updated = soft_threshold(z, lambda) / gjj;
                let delta = updated - beta[j];
                if delta != 0.0 {
                    beta[j] = updated;
                    let col = self.gram.column(j);
                    for (g, gk) in grad.iter_mut().zip(col.iter()) {
                        *g -= gk * delta;
                    }
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta <= tol {
                break;
            }
        }
        let coef = beta
            .iter()
            .zip(&self.scale)
            .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
            .collect();
        Ok(LassoSolution {
            lambda,
            coef_std: beta.to_vec(),
            coef,
            gradient: grad,
            sweeps,
        })
    }

    /// Largest violation of the LASSO optimality conditions at `sol`.
    pub fn kkt_residual(&self, sol: &LassoSolution) -> f64 {
        let p = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..p {
            if self.scale[j] == 0.0 {
                continue;
            }
            let g: f64 = self.cross[j]
                - (0..p).map(|k| self.gram[(j, k)] * sol.coef_std[k]).sum::<f64>();
            let b = sol.coef_std[j];
            let violation = if b != 0.0 {
                (g - sol.lambda * b.signum()).abs()
            } else {
                (g.abs() - sol.lambda).max(0.0)
            };
            worst = worst.max(violation);
        }
        worst
    }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Out-of-sample squared error `Σ (y − Dθ)²` from second moments of the held-out rows.
fn held_out_sse(gram: &DMatrix<f64>, cross: &DVector<f64>, yty: f64, coef: &[f64]) -> f64 {
    let theta = DVector::from_column_slice(coef);
    yty - 2.0 * theta.dot(cross) + (gram * &theta).dot(&theta)
}

/// Selects `Ĵ` as the number of nonzero sieve coefficients of a cross-validated
/// LASSO fit on a `max_dim` basis. Folds are contiguous blocks of base times.
pub fn select_lasso(
    sample: &RegressionSample,
    options: &LassoOptions,
    opts: FitOptions,
) -> Result<SelectionResult> {
    if options.max_dim < 4 {
        return Err(Error::Selection("LASSO maximal dimension must be at least 4".into()));
    }
    if options.folds < 2 || options.folds > sample.window_len {
        return Err(Error::Selection(format!(
            "{} folds cannot split {} base periods",
            options.folds, sample.window_len
        )));
    }
    let basis = make_basis_sorted(&sorted_states(sample), options.max_dim)?;
    let design = build_design(sample, &basis, opts.with_intermediate)?;
    let sieve_cols = design.sieve_dim();

    // contiguous period blocks; rows are time-major so blocks are row ranges
    let periods = design.n_periods;
    let mut fold_grams = Vec::with_capacity(options.folds);
    for k in 0..options.folds {
        let p0 = (k * periods / options.folds) as u32;
        let p1 = ((k + 1) * periods / options.folds) as u32;
        let r0 = design.period.partition_point(|&p| p < p0);
        let r1 = design.period.partition_point(|&p| p < p1);
        let (g, c) = design.gram_range(r0..r1);
        let yty: f64 = design.response[r0..r1].iter().map(|y| y * y).sum();
        fold_grams.push((g, c, yty, r1 - r0));
    }
    let p = design.ncols();
    let mut total_g = DMatrix::zeros(p, p);
    let mut total_c = DVector::zeros(p);
    for (g, c, _, _) in &fold_grams {
        total_g += g;
        total_c += c;
    }
    let full = LassoProblem::new(&total_g, &total_c, design.n);
    let lambda_max = full.lambda_max();
    let m = options.n_lambdas.max(2);
    let lambdas: Vec<f64> = (0..m)
        .map(|k| {
            lambda_max * libm::pow(options.lambda_min_ratio, k as f64 / (m - 1) as f64)
        })
        .collect();

    let mut cv_loss = vec![0.0; m];
    for (k, (g, c, yty, _)) in fold_grams.iter().enumerate() {
        let train_g = &total_g - g;
        let train_c = &total_c - c;
        let train_n = design.n - fold_grams[k].3;
        let problem = LassoProblem::new(&train_g, &train_c, train_n);
        let mut beta = vec![0.0; p];
        for (l, &lambda) in lambdas.iter().enumerate() {
            let sol = problem.solve(lambda, &mut beta, options.tol, options.max_sweeps)?;
            cv_loss[l] += held_out_sse(g, c, *yty, &sol.coef);
        }
    }
    for loss in cv_loss.iter_mut() {
        *loss /= design.n as f64;
    }
    // first minimum along a decreasing grid favours the larger λ on ties
    let hat = cv_loss
        .iter()
        .enumerate()
        .fold(0, |best, (l, &v)| if v < cv_loss[best] { l } else { best });

    let mut beta = vec![0.0; p];
    let mut nonzero_sieve = Vec::with_capacity(m);
    let mut nonzero_at_hat = 0;
    for (l, &lambda) in lambdas.iter().enumerate() {
        let sol = full.solve(lambda, &mut beta, options.tol, options.max_sweeps)?;
        let count = sol.coef_std[..sieve_cols].iter().filter(|b| **b != 0.0).count();
        nonzero_sieve.push(count);
        if l == hat {
            nonzero_at_hat = count;
        }
    }
    Ok(SelectionResult {
        selector: SelectorKind::Lasso,
        j_hat: lasso_refit_dim(nonzero_at_hat),
        candidates: Vec::new(),
        lasso: Some(LassoTrace {
            max_dim: sieve_cols,
            folds: options.folds,
            lambdas: lambdas.clone(),
            nonzero_sieve,
            cv_loss,
            lambda_hat: lambdas[hat],
            nonzero_at_hat,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn toy_problem(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = stream_rng(seed, 0);
        let d = DMatrix::from_fn(n, p, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let truth = DVector::from_fn(p, |j, _| if j % 4 == 0 { 1.5 } else { 0.0 });
        let noise = DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let y = &d * truth + noise;
        (d.transpose() * &d, d.transpose() * y)
    }

    #[test]
    fn kkt_holds_on_toy_instance() {
        let (g, c) = toy_problem(200, 20, 11);
        let problem = LassoProblem::new(&g, &c, 200);
        let lambda = 0.1 * problem.lambda_max();
        let mut beta = vec![0.0; 20];
        let sol = problem.solve(lambda, &mut beta, 1e-10, 100_000).unwrap();
        assert!(problem.kkt_residual(&sol) <= 1e-6);
        let active = sol.coef_std.iter().filter(|b| **b != 0.0).count();
        assert!(active > 0 && active < 20);
    }

    #[test]
    fn lambda_above_max_zeroes_everything() {
        let (g, c) = toy_problem(100, 12, 12);
        let problem = LassoProblem::new(&g, &c, 100);
        let mut beta = vec![0.0; 12];
        let sol = problem.solve(problem.lambda_max() * 1.01, &mut beta, 1e-9, 1000).unwrap();
        assert!(sol.coef.iter().all(|b| *b == 0.0));
        assert_eq!(lasso_refit_dim(0), 4);
    }

    #[test]
    fn zero_lambda_keeps_all_coefficients() {
        let (g, c) = toy_problem(150, 10, 13);
        let problem = LassoProblem::new(&g, &c, 150);
        let mut beta = vec![0.0; 10];
        let sol = problem.solve(0.0, &mut beta, 1e-12, 100_000).unwrap();
        assert!(sol.coef.iter().all(|b| *b != 0.0));
        let ols = crate::linalg::gram_solve(&g, &c).unwrap();
        for (a, b) in sol.coef.iter().zip(ols.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let (g, c) = toy_problem(100, 12, 14);
        let problem = LassoProblem::new(&g, &c, 100);
        let mut beta = vec![0.0; 12];
        let err = problem.solve(0.0, &mut beta, 0.0, 3).unwrap_err();
        assert!(matches!(err, Error::Convergence { sweeps: 3, .. }));
    }

    #[test]
    fn oracle_contract() {
        assert_eq!(select_oracle(4).unwrap().j_hat, 4);
        assert_eq!(select_oracle(10).unwrap().j_hat, 10);
        assert!(select_oracle(3).is_err());
    }
}
