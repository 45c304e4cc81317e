//! Sieve local-projection design, OLS fit and its block representation.
//!
//! Column layout of a design: the `J` shock-interacted basis columns
//! `φ_j(Z_{i,t-1}) X_t` first, then (optionally) `h` intermediate blocks
//! `φ_j(Z_{i,t+s-1}) X_{t+s}` for `s = 1..=h`, then the `Q` controls
//! `W_{i,t-1}`. Everything after the first block is treated as a control
//! when partialling.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::RegressionSample;
use crate::spline::BasisSpec;

/// Least-squares backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Column-pivoted Householder QR on the dense design.
    #[default]
    Qr,
    /// Normal equations accumulated from the sparse rows, solved by an
    /// equilibrated Cholesky factorization. Much cheaper for large panels.
    Gram,
}

/// A block of columns with at most four consecutive nonzeros per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    pub cols: usize,
    pub width: usize,
    /// Column (within the block) of each row's first stored value.
    pub start: Vec<u32>,
    /// Row-major `n×width` stored values.
    pub vals: Vec<f64>,
}

impl SparseBlock {
    fn from_basis(basis: &BasisSpec, states: &[f64], shocks: &[f64]) -> Self {
        let n = states.len();
        let mut start = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(4 * n);
        for (&z, &x) in states.iter().zip(shocks) {
            let (s, v) = basis.eval_local(z);
            start.push(s as u32);
            vals.extend(v.iter().map(|b| b * x));
        }
        Self {
            cols: basis.dim,
            width: 4,
            start,
            vals,
        }
    }
}

/// Basis rows `φ(Z_{i,τ}) X_{τ+1}` for every `(τ, i)` cell of the sample.
///
/// Block `s` of row `(k, i)` is cell `(k + s, i)`, which lets the Gram
/// matrix be assembled from per-period cross-sectional sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLayout {
    pub n_units: usize,
    /// Number of distinct `τ` values.
    pub n_times: usize,
    /// `τ`-major start column of each cell's four stored values.
    pub start: Vec<u32>,
    pub vals: Vec<f64>,
}

impl CellLayout {
    #[inline]
    fn cell(&self, tau: usize, i: usize) -> (usize, &[f64]) {
        let c = tau * self.n_units + i;
        (self.start[c] as usize, &self.vals[4 * c..4 * c + 4])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub n: usize,
    pub horizon: usize,
    /// `blocks[0]` is the sieve block; the rest are intermediate blocks.
    pub blocks: Vec<SparseBlock>,
    /// Row-major `n×Q`.
    pub controls: Vec<f64>,
    pub n_controls: usize,
    pub response: Vec<f64>,
    /// Base-time window position of each row.
    pub period: Vec<u32>,
    pub n_periods: usize,
    pub basis: Option<BasisSpec>,
    /// Present when rows are period-major and blocks follow the cell layout.
    pub cells: Option<CellLayout>,
}

impl DesignMatrix {
    pub fn sieve_dim(&self) -> usize {
        self.blocks[0].cols
    }

    pub fn ncols(&self) -> usize {
        self.blocks.iter().map(|b| b.cols).sum::<usize>() + self.n_controls
    }

    pub fn n_intermediate_blocks(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Calls `f(column, value)` for the stored entries of row `r` in
    /// ascending column order.
    #[inline]
    pub fn for_each_entry(&self, r: usize, mut f: impl FnMut(usize, f64)) {
        let mut offset = 0;
        for block in &self.blocks {
            let s = offset + block.start[r] as usize;
            let vals = &block.vals[r * block.width..(r + 1) * block.width];
            for (k, &v) in vals.iter().enumerate() {
                f(s + k, v);
            }
            offset += block.cols;
        }
        let q = self.n_controls;
        for (k, &v) in self.controls[r * q..(r + 1) * q].iter().enumerate() {
            f(offset + k, v);
        }
    }

    /// `Dθ`
    pub fn predict(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let mut acc = 0.0;
                self.for_each_entry(r, |c, v| acc += v * coef[c]);
                acc
            })
            .collect()
    }

    /// `(DᵀD, Dᵀy)` accumulated over a row range.
    ///
    /// Ranges that cover whole periods use the cell layout when available.
    pub fn gram_range(&self, rows: core::ops::Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
        if let Some(cells) = &self.cells {
            let n_units = cells.n_units;
            if rows.start % n_units == 0 && rows.end % n_units == 0 && rows.start <= rows.end {
                return self.gram_periods(cells, rows.start / n_units..rows.end / n_units);
            }
        }
        self.gram_rows(rows)
    }

    /// Row-by-row accumulation over the sparse entries.
    pub fn gram_rows(&self, rows: core::ops::Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.ncols();
        let mut g = vec![0.0; p * p];
        let mut c = vec![0.0; p];
        let mut idx: Vec<usize> = Vec::with_capacity(p);
        let mut val: Vec<f64> = Vec::with_capacity(p);
        for r in rows {
            idx.clear();
            val.clear();
            self.for_each_entry(r, |col, v| {
                if v != 0.0 {
                    idx.push(col);
                    val.push(v);
                }
            });
            let y = self.response[r];
            for a in 0..idx.len() {
                let va = val[a];
                c[idx[a]] += va * y;
                let row = &mut g[idx[a] * p..(idx[a] + 1) * p];
                for b in a..idx.len() {
                    row[idx[b]] += va * val[b];
                }
            }
        }
        let mut gram = DMatrix::from_row_slice(p, p, &g);
        for i in 0..p {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        (gram, DVector::from_vec(c))
    }

    /// Period-range accumulation: block `(s, s + d)` of the Gram matrix is
    /// `Σ_τ P_d(τ)` over a shifted window, with `P_d(τ) = Σ_i c(τ, i) c(τ + d, i)ᵀ`.
    fn gram_periods(&self, cells: &CellLayout, periods: core::ops::Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.ncols();
        let j = self.sieve_dim();
        let nb = self.blocks.len();
        let q = self.n_controls;
        let n_units = cells.n_units;
        let off_w = nb * j;
        let mut g = vec![0.0; p * p];
        let mut c = vec![0.0; p];
        let (k0, k1) = (periods.start, periods.end);
        if k0 < k1 {
            let mut pd = vec![0.0; j * j];
            for d in 0..nb {
                let taus = k1 - k0 + nb - 1 - d;
                let mut per_tau = vec![0.0; taus * j * j];
                for (m, tau) in (k0..k0 + taus).enumerate() {
                    pd.iter_mut().for_each(|v| *v = 0.0);
                    for i in 0..n_units {
                        let (sa, va) = cells.cell(tau, i);
                        let (sb, vb) = cells.cell(tau + d, i);
                        for (a, &x) in va.iter().enumerate() {
                            let row = &mut pd[(sa + a) * j + sb..(sa + a) * j + sb + 4];
                            for (r, &y) in row.iter_mut().zip(vb) {
                                *r += x * y;
                            }
                        }
                    }
                    per_tau[m * j * j..(m + 1) * j * j].copy_from_slice(&pd);
                }
                for s in 0..nb - d {
                    let r = s + d;
                    let mut acc = vec![0.0; j * j];
                    for m in s..s + (k1 - k0) {
                        for (a, v) in acc.iter_mut().zip(&per_tau[m * j * j..(m + 1) * j * j]) {
                            *a += v;
                        }
                    }
                    for a in 0..j {
                        let dst = &mut g[(s * j + a) * p + r * j..(s * j + a) * p + r * j + j];
                        dst.copy_from_slice(&acc[a * j..(a + 1) * j]);
                    }
                }
            }
            for k in k0..k1 {
                for i in 0..n_units {
                    let row = k * n_units + i;
                    let y = self.response[row];
                    let w = &self.controls[row * q..(row + 1) * q];
                    for s in 0..nb {
                        let (st, v) = cells.cell(k + s, i);
                        for (a, &x) in v.iter().enumerate() {
                            let col = s * j + st + a;
                            c[col] += x * y;
                            let dst = &mut g[col * p + off_w..col * p + off_w + q];
                            for (d, &wq) in dst.iter_mut().zip(w) {
                                *d += x * wq;
                            }
                        }
                    }
                    for a in 0..q {
                        c[off_w + a] += w[a] * y;
                        for b in a..q {
                            g[(off_w + a) * p + off_w + b] += w[a] * w[b];
                        }
                    }
                }
            }
        }
        let mut gram = DMatrix::from_row_slice(p, p, &g);
        for i in 0..p {
            for k in 0..i {
                gram[(i, k)] = gram[(k, i)];
            }
        }
        (gram, DVector::from_vec(c))
    }

    pub fn gram(&self) -> (DMatrix<f64>, DVector<f64>) {
        self.gram_range(0..self.n)
    }

    /// Column-major dense copy of the full design.
    pub fn dense_column_major(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * self.ncols()];
        for r in 0..n {
            self.for_each_entry(r, |c, v| a[c * n + r] = v);
        }
        a
    }

    fn dense_columns(&self, cols: core::ops::Range<usize>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, cols.len());
        for r in 0..self.n {
            self.for_each_entry(r, |c, v| {
                if cols.contains(&c) {
                    m[(r, c - cols.start)] = v;
                }
            });
        }
        m
    }

    /// Dense `n×J` sieve block.
    pub fn sieve_block(&self) -> DMatrix<f64> {
        self.dense_columns(0..self.sieve_dim())
    }

    /// Dense intermediate block `s` (1-based), if present.
    pub fn intermediate_block(&self, s: usize) -> Option<DMatrix<f64>> {
        if s == 0 || s >= self.blocks.len() {
            return None;
        }
        let offset: usize = self.blocks[..s].iter().map(|b| b.cols).sum();
        Some(self.dense_columns(offset..offset + self.blocks[s].cols))
    }

    /// Dense `n×Q` control block.
    pub fn control_block(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n_controls, &self.controls)
    }
}

/// Assembles the horizon-`h` design for a given basis.
pub fn build_design(
    sample: &RegressionSample,
    basis: &BasisSpec,
    with_intermediate: bool,
) -> Result<DesignMatrix> {
    let n = sample.n();
    if sample.state_at_base.len() != n || sample.shock_at_base.len() != n {
        return Err(Error::Design("sample columns disagree on row count".into()));
    }
    if sample.controls_at_base.len() != n * sample.n_controls {
        return Err(Error::Design("control block has the wrong shape".into()));
    }
    let h = sample.horizon;
    let nb = if with_intermediate && h > 0 { h + 1 } else { 1 };
    let (fx, fz) = match (&sample.future_shocks, &sample.future_states) {
        (Some(fx), Some(fz)) => (fx.as_slice(), fz.as_slice()),
        _ if with_intermediate => {
            return Err(Error::Design(
                "intermediate blocks requested but the sample carries no future shocks".into(),
            ))
        }
        _ => (&[][..], &[][..]),
    };
    if nb > 1 && (fx.len() != n * h || fz.len() != n * h) {
        return Err(Error::Design("future shock arrays have the wrong shape".into()));
    }
    let n_units = sample.n_units;
    let window = sample.window_len;
    let period_major = n == n_units * window
        && sample
            .rows
            .iter()
            .enumerate()
            .all(|(r, &(i, t))| i == r % n_units && t == sample.window_start + r / n_units);
    let (blocks, cells) = if period_major {
        let cells = cell_layout(basis, sample, nb, fx, fz);
        let blocks = (0..nb)
            .map(|s| {
                let mut start = Vec::with_capacity(n);
                let mut vals = Vec::with_capacity(4 * n);
                for r in 0..n {
                    let (st, v) = cells.cell(r / n_units + s, r % n_units);
                    start.push(st as u32);
                    vals.extend_from_slice(v);
                }
                SparseBlock {
                    cols: basis.dim,
                    width: 4,
                    start,
                    vals,
                }
            })
            .collect();
        (blocks, Some(cells))
    } else {
        let mut blocks = vec![SparseBlock::from_basis(basis, &sample.state_at_base, &sample.shock_at_base)];
        for s in 0..nb - 1 {
            let states: Vec<f64> = (0..n).map(|r| fz[r * h + s]).collect();
            let shocks: Vec<f64> = (0..n).map(|r| fx[r * h + s]).collect();
            blocks.push(SparseBlock::from_basis(basis, &states, &shocks));
        }
        (blocks, None)
    };
    let design = DesignMatrix {
        n,
        horizon: h,
        blocks,
        controls: sample.controls_at_base.clone(),
        n_controls: sample.n_controls,
        response: sample.response.clone(),
        period: sample.rows.iter().map(|&(_, t)| (t - sample.window_start) as u32).collect(),
        n_periods: sample.window_len,
        basis: Some(basis.clone()),
        cells,
    };
    let finite = design.blocks.iter().all(|b| b.vals.iter().all(|v| v.is_finite()))
        && design.controls.iter().all(|v| v.is_finite())
        && design.response.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::Design("design contains non-finite entries".into()));
    }
    Ok(design)
}

fn cell_layout(basis: &BasisSpec, sample: &RegressionSample, nb: usize, fx: &[f64], fz: &[f64]) -> CellLayout {
    let n_units = sample.n_units;
    let window = sample.window_len;
    let h = sample.horizon;
    let n_times = window + nb - 1;
    let mut start = Vec::with_capacity(n_times * n_units);
    let mut vals = Vec::with_capacity(4 * n_times * n_units);
    for tau in 0..n_times {
        for i in 0..n_units {
            let (z, x) = if tau < window {
                let r = tau * n_units + i;
                (sample.state_at_base[r], sample.shock_at_base[r])
            } else {
                let r = (window - 1) * n_units + i;
                let s = tau - (window - 1);
                (fz[r * h + s - 1], fx[r * h + s - 1])
            };
            let (st, v) = basis.eval_local(z);
            start.push(st as u32);
            vals.extend(v.iter().map(|b| b * x));
        }
    }
    CellLayout {
        n_units,
        n_times,
        start,
        vals,
    }
}

/// Coefficients, residuals and second moments of an unrestricted OLS fit.
#[derive(Debug, Clone)]
struct OlsParts {
    coef: Vec<f64>,
    residuals: Vec<f64>,
    ssr: f64,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
}

fn solve_design(design: &DesignMatrix, solver: Solver) -> Result<OlsParts> {
    let p = design.ncols();
    if design.n <= p {
        return Err(Error::Design(format!(
            "{} rows cannot identify {p} columns",
            design.n
        )));
    }
    let (gram, cross) = design.gram();
    let coef = match solver {
        Solver::Qr => {
            let mut dense = design.dense_column_major();
            linalg::qr_least_squares(&mut dense, design.n, p, &design.response)?
        }
        Solver::Gram => linalg::gram_solve(&gram, &cross)?.as_slice().to_vec(),
    };
    let fitted = design.predict(&coef);
    let residuals: Vec<f64> = design.response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let ssr = residuals.iter().map(|u| u * u).sum();
    Ok(OlsParts {
        coef,
        residuals,
        ssr,
        gram,
        cross,
    })
}

/// Result of one horizon-`h` sieve LP regression.
///
/// Second-moment blocks are scaled by `1/n`; block 1 is the sieve block and
/// block 2 collects intermediate blocks and controls.
#[derive(Debug, Clone)]
pub struct LpFit {
    pub horizon: usize,
    pub basis: BasisSpec,
    pub solver: Solver,
    /// Full coefficient vector θ̂ in design column order.
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ssr: f64,
    pub n: usize,
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    /// `Â12 Â22⁻¹`, the projection of the sieve block on the other columns.
    pub partial: DMatrix<f64>,
    /// Schur complement `Â11 − Â12 Â22⁻¹ Â21`.
    pub schur: DMatrix<f64>,
    /// `Dᵀy / n`, split like the blocks.
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    pub design: DesignMatrix,
}

impl LpFit {
    pub fn sieve_dim(&self) -> usize {
        self.basis.dim
    }

    /// `b̂_h`
    pub fn sieve_coef(&self) -> &[f64] {
        &self.coef[..self.sieve_dim()]
    }

    /// `γ̂_h`, including intermediate-block coefficients.
    pub fn control_coef(&self) -> &[f64] {
        &self.coef[self.sieve_dim()..]
    }

    /// Number of estimated parameters.
    pub fn n_params(&self) -> usize {
        self.coef.len()
    }

    /// `ĝ_h(z)`
    pub fn g_hat(&self, z: f64) -> f64 {
        self.basis.combine(self.sieve_coef(), z)
    }
}

/// OLS by pivoted QR.
pub fn fit_ols(design: DesignMatrix) -> Result<LpFit> {
    fit_ols_with(design, Solver::Qr)
}

pub fn fit_ols_with(design: DesignMatrix, solver: Solver) -> Result<LpFit> {
    let basis = design
        .basis
        .clone()
        .ok_or_else(|| Error::Design("design was not built from a B-spline basis".into()))?;
    let parts = solve_design(&design, solver)?;
    let n = design.n;
    let j = design.sieve_dim();
    let p = design.ncols();
    let scale = 1.0 / n as f64;
    let a = &parts.gram * scale;
    let a11 = a.view((0, 0), (j, j)).into_owned();
    let a12 = a.view((0, j), (j, p - j)).into_owned();
    let a22 = a.view((j, j), (p - j, p - j)).into_owned();
    let b = &parts.cross * scale;
    let b1 = b.rows(0, j).into_owned();
    let b2 = b.rows(j, p - j).into_owned();
    let (partial, schur) = partial_out(&a11, &a12, &a22)?;
    Ok(LpFit {
        horizon: design.horizon,
        basis,
        solver,
        coef: parts.coef,
        residuals: parts.residuals,
        ssr: parts.ssr,
        n,
        a11,
        a12,
        a22,
        partial,
        schur,
        b1,
        b2,
        design,
    })
}

fn partial_out(
    a11: &DMatrix<f64>,
    a12: &DMatrix<f64>,
    a22: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let j = a11.nrows();
    if a22.nrows() == 0 {
        return Ok((DMatrix::zeros(j, 0), linalg::symmetrize(a11)));
    }
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(a22)).ok_or_else(|| Error::Rank {
        column: j,
        detail: "control second-moment block Â22 is singular".into(),
    })?;
    // Â22⁻¹ Â21, then transpose to get Â12 Â22⁻¹
    let partial = chol.solve(&a12.transpose()).transpose();
    let schur = linalg::symmetrize(&(a11 - &partial * a12.transpose()));
    Ok((partial, schur))
}

/// Sieve coefficients through the block-inversion formula
/// `Ã11⁻¹ (B1 − Â12 Â22⁻¹ B2)`.
pub fn schur_b(fit: &LpFit) -> Result<Vec<f64>> {
    let rhs = &fit.b1 - &fit.partial * &fit.b2;
    let chol = nalgebra::Cholesky::new(fit.schur.clone()).ok_or_else(|| Error::Rank {
        column: 0,
        detail: "Schur complement Ã11 is singular".into(),
    })?;
    Ok(chol.solve(&rhs).as_slice().to_vec())
}

/// `ĝ_h(z) δ` on each grid point.
pub fn evaluate_irf(fit: &LpFit, grid: &[f64], delta: f64) -> Vec<f64> {
    grid.iter().map(|&z| fit.g_hat(z) * delta).collect()
}

/// Linear interaction LP `(α + β Z_{i,t-1}) X_t + W_{i,t-1}ᵀγ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLpFit {
    pub horizon: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub ssr: f64,
    pub n: usize,
    pub residuals: Vec<f64>,
}

impl LinearLpFit {
    pub fn irf(&self, z: f64, delta: f64) -> f64 {
        (self.alpha + self.beta * z) * delta
    }
}

/// Fits the linear interaction LP on a sample (intermediate terms ignored).
pub fn fit_linear_lp(sample: &RegressionSample, solver: Solver) -> Result<LinearLpFit> {
    let n = sample.n();
    let mut vals = Vec::with_capacity(2 * n);
    for (&z, &x) in sample.state_at_base.iter().zip(&sample.shock_at_base) {
        vals.push(x);
        vals.push(z * x);
    }
    let design = DesignMatrix {
        n,
        horizon: sample.horizon,
        blocks: vec![SparseBlock {
            cols: 2,
            width: 2,
            start: vec![0; n],
            vals,
        }],
        controls: sample.controls_at_base.clone(),
        n_controls: sample.n_controls,
        response: sample.response.clone(),
        period: sample.rows.iter().map(|&(_, t)| (t - sample.window_start) as u32).collect(),
        n_periods: sample.window_len,
        basis: None,
        cells: None,
    };
    let parts = solve_design(&design, solver)?;
    Ok(LinearLpFit {
        horizon: sample.horizon,
        alpha: parts.coef[0],
        beta: parts.coef[1],
        gamma: parts.coef[2..].to_vec(),
        ssr: parts.ssr,
        n,
        residuals: parts.residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{build_regression_sample, OutcomeMode, PanelDataset};
    use crate::rng::stream_rng;
    use crate::spline::make_basis;
    use alloc::string::ToString;
    use rand_distr::{Distribution, StandardNormal};

    fn random_panel(n: usize, t: usize, q: usize, seed: u64) -> PanelDataset {
        let mut rng = stream_rng(seed, 0);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let state: Vec<f64> = (0..n * t).map(|_| draw()).collect();
        let shock: Vec<f64> = (0..t).map(|_| draw()).collect();
        let controls: Vec<f64> = (0..n * t * q).map(|_| draw()).collect();
        let outcome: Vec<f64> = (0..n * t).map(|_| draw()).collect();
        PanelDataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            (1..=t as i64).collect(),
            outcome,
            shock,
            state,
            controls,
            (0..q).map(|k| alloc::format!("w{}", k + 1)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn period_gram_matches_row_gram() {
        let p = random_panel(13, 25, 2, 8);
        for (h, flag) in [(0, false), (0, true), (3, false), (3, true), (5, true)] {
            let s = build_regression_sample(&p, h, OutcomeMode::Level, flag).unwrap();
            let b = make_basis(&s.state_at_base, 7).unwrap();
            let d = build_design(&s, &b, flag).unwrap();
            assert!(d.cells.is_some());
            let n_units = 13;
            for (k0, k1) in [(0, d.n_periods), (2, 9), (4, 4)] {
                let rows = k0 * n_units..k1 * n_units;
                let (g1, c1) = d.gram_range(rows.clone());
                let (g2, c2) = d.gram_rows(rows);
                let scale = g2.abs().max().max(1.0);
                assert!((&g1 - &g2).abs().max() <= 1e-12 * scale, "h={h} flag={flag}");
                assert!((&c1 - &c2).abs().max() <= 1e-12 * c2.abs().max().max(1.0));
            }
        }
    }

    #[test]
    fn column_count_with_intermediate() {
        let p = random_panel(20, 30, 1, 1);
        let s = build_regression_sample(&p, 4, OutcomeMode::Level, true).unwrap();
        let b = make_basis(&s.state_at_base, 6).unwrap();
        let d = build_design(&s, &b, true).unwrap();
        assert_eq!(d.ncols(), 6 + 24 + 1);
        assert_eq!(d.n_intermediate_blocks(), 4);
        assert_eq!(d.intermediate_block(4).unwrap().ncols(), 6);
    }

    #[test]
    fn h0_with_flag_has_no_intermediate_blocks() {
        let p = random_panel(10, 12, 0, 2);
        let s = build_regression_sample(&p, 0, OutcomeMode::Level, true).unwrap();
        let b = make_basis(&s.state_at_base, 5).unwrap();
        let d = build_design(&s, &b, true).unwrap();
        assert_eq!(d.n_intermediate_blocks(), 0);
        assert_eq!(d.ncols(), 5);
    }

    #[test]
    fn flag_without_future_shocks_is_design_error() {
        let p = random_panel(10, 12, 0, 2);
        let s = build_regression_sample(&p, 2, OutcomeMode::Level, false).unwrap();
        let b = make_basis(&s.state_at_base, 5).unwrap();
        assert!(matches!(build_design(&s, &b, true), Err(Error::Design(_))));
    }

    #[test]
    fn exact_fit_has_zero_residuals() {
        let p = random_panel(15, 10, 1, 3);
        let mut s = build_regression_sample(&p, 0, OutcomeMode::Level, false).unwrap();
        let b = make_basis(&s.state_at_base, 5).unwrap();
        let truth = [0.3, -1.0, 2.0, 0.5, 1.5, -0.7];
        let d = build_design(&s, &b, false).unwrap();
        s.response = d.predict(&truth);
        for solver in [Solver::Qr, Solver::Gram] {
            let fit = fit_ols_with(build_design(&s, &b, false).unwrap(), solver).unwrap();
            assert!(fit.residuals.iter().all(|u| u.abs() < 1e-10));
            for (c, t) in fit.coef.iter().zip(truth) {
                assert!((c - t).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_shock_is_rank_deficient() {
        let mut p = random_panel(10, 12, 1, 4);
        p.shock.iter_mut().for_each(|x| *x = 0.0);
        let s = build_regression_sample(&p, 0, OutcomeMode::Level, false).unwrap();
        let b = make_basis(&s.state_at_base, 4).unwrap();
        let d = build_design(&s, &b, false).unwrap();
        assert!(d.sieve_block().iter().all(|&v| v == 0.0));
        assert!(matches!(fit_ols(d.clone()), Err(Error::Rank { .. })));
        assert!(matches!(fit_ols_with(d, Solver::Gram), Err(Error::Rank { .. })));
    }

    #[test]
    fn duplicated_control_is_rank_error() {
        let mut p = random_panel(10, 12, 2, 5);
        for k in 0..p.controls.len() / 2 {
            p.controls[2 * k + 1] = p.controls[2 * k];
        }
        let s = build_regression_sample(&p, 0, OutcomeMode::Level, false).unwrap();
        let b = make_basis(&s.state_at_base, 4).unwrap();
        let d = build_design(&s, &b, false).unwrap();
        assert!(matches!(fit_ols(d), Err(Error::Rank { .. })));
    }

    #[test]
    fn schur_route_matches_ols() {
        let p = random_panel(12, 15, 2, 6);
        let s = build_regression_sample(&p, 2, OutcomeMode::Level, true).unwrap();
        let b = make_basis(&s.state_at_base, 6).unwrap();
        let fit = fit_ols(build_design(&s, &b, true).unwrap()).unwrap();
        let via_schur = schur_b(&fit).unwrap();
        for (a, b) in via_schur.iter().zip(fit.sieve_coef()) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn irf_is_linear_in_delta() {
        let p = random_panel(12, 15, 0, 7);
        let s = build_regression_sample(&p, 0, OutcomeMode::Level, false).unwrap();
        let b = make_basis(&s.state_at_base, 5).unwrap();
        let fit = fit_ols(build_design(&s, &b, false).unwrap()).unwrap();
        let grid = [-1.0, 0.0, 0.5, 2.0];
        assert!(evaluate_irf(&fit, &grid, 0.0).iter().all(|&v| v == 0.0));
        let one = evaluate_irf(&fit, &grid, 0.7);
        let two = evaluate_irf(&fit, &grid, 1.4);
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn constant_state_breaks_linear_lp() {
        let mut p = random_panel(10, 12, 0, 8);
        p.state.iter_mut().for_each(|z| *z = 2.0);
        let s = build_regression_sample(&p, 0, OutcomeMode::Level, false).unwrap();
        assert!(matches!(fit_linear_lp(&s, Solver::Qr), Err(Error::Rank { .. })));
        match fit_linear_lp(&s, Solver::Gram) {
            Err(Error::Rank { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected rank error, got {other:?}"),
        }
    }
}
