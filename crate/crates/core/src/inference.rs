//! Pointwise and uniform inference for `ĝ_h`.
//!
//! The chain is: partialled score process → Bartlett long-run covariance →
//! sandwich covariance of `b̂_h` → pointwise intervals from `φ(z)ᵀ V̂ φ(z)`
//! and a sup-statistic multiplier bootstrap for the uniform band.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::LpFit;
use crate::normal::two_sided_critical;
use crate::rng::stream_rng;

/// Variances below zero but above this are rounding and get clipped.
pub const VARIANCE_CLIP: f64 = 1e-12;

/// Per-period sums `ŝ_{h,t} = Σ_i P̃_{h,i,t} û_{i,t+h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    /// `window_len × J`, row `k` is the score of the `k`-th base period.
    pub scores: DMatrix<f64>,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.scores.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HacEstimate {
    pub omega: DMatrix<f64>,
    pub lag: usize,
    /// `w_k` for `k = 1..=lag`.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefCovariance {
    pub v: DMatrix<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub center: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Estimated response curve with pointwise and uniform bands.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfCurve {
    pub horizon: usize,
    pub delta: f64,
    pub alpha: f64,
    pub draws: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub estimate: Vec<f64>,
    /// `σ̂_h(z)` for the unit shock.
    pub pointwise_se: Vec<f64>,
    pub pointwise_lo: Vec<f64>,
    pub pointwise_hi: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    /// `c_{h,1−α}` for the unit shock.
    pub critical_value: f64,
}

impl IrfCurve {
    /// Mean of `band_hi − band_lo` over the grid.
    pub fn mean_band_width(&self) -> f64 {
        let total: f64 = self.band_hi.iter().zip(&self.band_lo).map(|(h, l)| h - l).sum();
        total / self.grid.len() as f64
    }
}

/// `⌊4 (n/100)^{2/9}⌋`
pub fn default_lag(n: usize) -> usize {
    libm::floor(4.0 * libm::pow(n as f64 / 100.0, 2.0 / 9.0)) as usize
}

/// Bartlett weights `w_k = 1 − k/(L+1)`, `k = 1..=L`.
pub fn bartlett_weights(lag: usize) -> Vec<f64> {
    let denom = lag as f64 + 1.0;
    (1..=lag).map(|k| (denom - k as f64) / denom).collect()
}

/// Builds the score process from a fitted LP. Intermediate blocks are
/// partialled out together with the controls.
pub fn score_process(fit: &LpFit) -> Result<ScoreSeries> {
    let design = &fit.design;
    let j = fit.sieve_dim();
    let p = design.ncols();
    if fit.partial.nrows() != j || fit.partial.ncols() != p - j {
        return Err(Error::Rank {
            column: j,
            detail: "partialling coefficients are missing".into(),
        });
    }
    let mut scores = DMatrix::zeros(design.n_periods, j);
    let mut sieve = vec![0.0; j];
    let mut other: Vec<(usize, f64)> = Vec::with_capacity(p - j);
    for r in 0..design.n {
        sieve.iter_mut().for_each(|v| *v = 0.0);
        other.clear();
        design.for_each_entry(r, |c, v| {
            if c < j {
                sieve[c] = v;
            } else if v != 0.0 {
                other.push((c - j, v));
            }
        });
        let u = fit.residuals[r];
        let t = design.period[r] as usize;
        for a in 0..j {
            let mut ptilde = sieve[a];
            for &(c, v) in &other {
                ptilde -= fit.partial[(a, c)] * v;
            }
            scores[(t, a)] += ptilde * u;
        }
    }
    Ok(ScoreSeries { scores })
}

/// `Ω̂ = Γ̂(0) + Σ_{k=1}^{L} w_k (Γ̂(k) + Γ̂(k)ᵀ)`, `Γ̂(k) = (1/n) Σ_{t>k} ŝ_t ŝ_{t−k}ᵀ`.
///
/// `lag = None` uses [`default_lag`] of `n`.
pub fn bartlett_hac(scores: &ScoreSeries, lag: Option<usize>, n: usize) -> Result<HacEstimate> {
    let len = scores.len();
    let lag = lag.unwrap_or_else(|| default_lag(n));
    if lag >= len {
        return Err(Error::Hac(format!(
            "truncation lag {lag} must be below the score length {len}"
        )));
    }
    if n == 0 {
        return Err(Error::Hac("sample size must be positive".into()));
    }
    let s = &scores.scores;
    let inv_n = 1.0 / n as f64;
    let autocov = |k: usize| -> DMatrix<f64> {
        let lead = s.rows(k, len - k);
        let lagged = s.rows(0, len - k);
        lead.transpose() * lagged * inv_n
    };
    let weights = bartlett_weights(lag);
    let mut omega = autocov(0);
    for (k, w) in (1..=lag).zip(&weights) {
        let gamma = autocov(k);
        omega += (&gamma + gamma.transpose()) * *w;
    }
    Ok(HacEstimate {
        omega: linalg::symmetrize(&omega),
        lag,
        weights,
    })
}

/// `V̂ = (1/n) Ã11⁻¹ Ω̂ Ã11⁻¹ᵀ`
pub fn coef_covariance(hac: &HacEstimate, fit: &LpFit) -> Result<CoefCovariance> {
    sandwich(&hac.omega, &fit.schur, fit.n)
}

/// Sandwich covariance from an explicit long-run covariance and Schur complement.
pub fn sandwich(omega: &DMatrix<f64>, schur: &DMatrix<f64>, n: usize) -> Result<CoefCovariance> {
    let inv = linalg::spd_inverse(schur, "Schur complement Ã11")?;
    let v = &inv * omega * inv.transpose() / n as f64;
    Ok(CoefCovariance {
        v: linalg::symmetrize(&v),
        n,
    })
}

fn quadratic_form(v: &DMatrix<f64>, phi: &DVector<f64>) -> Result<f64> {
    let var = (v * phi).dot(phi);
    if var < -VARIANCE_CLIP {
        return Err(Error::Numerical(format!("negative variance {var:.3e}")));
    }
    Ok(var.max(0.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn interval(center: f64, se: f64, crit: f64, delta: f64) -> Interval {
    let a = center - crit * se * delta;
    let b = center + crit * se * delta;
    Interval {
        center,
        se,
        lo: a.min(b),
        hi: a.max(b),
    }
}

/// `ĝ(z)δ ± z_{1−α/2} σ̂(z) δ` at each grid point.
pub fn pointwise_ci(
    fit: &LpFit,
    cov: &CoefCovariance,
    grid: &[f64],
    alpha: f64,
    delta: f64,
) -> Result<Vec<Interval>> {
    check_alpha(alpha)?;
    let crit = two_sided_critical(alpha);
    grid.iter()
        .map(|&z| {
            let phi = DVector::from_vec(fit.basis.eval_row(z));
            let se = libm::sqrt(quadratic_form(&cov.v, &phi)?);
            Ok(interval(fit.g_hat(z) * delta, se, crit, delta))
        })
        .collect()
}

/// Interval for `(ĝ(z_a) − ĝ(z_b)) δ` using `Δφᵀ V̂ Δφ`.
pub fn contrast_ci(
    fit: &LpFit,
    cov: &CoefCovariance,
    z_a: f64,
    z_b: f64,
    alpha: f64,
    delta: f64,
) -> Result<Interval> {
    check_alpha(alpha)?;
    let crit = two_sided_critical(alpha);
    let diff = DVector::from_vec(fit.basis.eval_row(z_a)) - DVector::from_vec(fit.basis.eval_row(z_b));
    let se = libm::sqrt(quadratic_form(&cov.v, &diff)?);
    let center = (fit.g_hat(z_a) - fit.g_hat(z_b)) * delta;
    Ok(interval(center, se, crit, delta))
}

/// Sup-statistic critical value `c_{1−α}` for rows `L = Φ V̂^{1/2}`.
///
/// Draw `b` uses stream `b` of the generator keyed by `seed`; the quantile is
/// the `⌈(1−α)B⌉`-th order statistic of `max_m |L_m ξ^{(b)}|`.
pub fn sup_critical_value(loadings: &DMatrix<f64>, draws: usize, alpha: f64, seed: u64) -> f64 {
    let (m, j) = loadings.shape();
    let mut stats = Vec::with_capacity(draws);
    let mut xi = vec![0.0; j];
    for b in 0..draws {
        let mut rng = stream_rng(seed, b as u64);
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let mut sup: f64 = 0.0;
        for r in 0..m {
            let mut g = 0.0;
            for (k, x) in xi.iter().enumerate() {
                g += loadings[(r, k)] * x;
            }
            sup = sup.max(g.abs());
        }
        stats.push(sup);
    }
    stats.sort_unstable_by(f64::total_cmp);
    let rank = libm::ceil((1.0 - alpha) * draws as f64) as usize;
    stats[rank.clamp(1, draws) - 1]
}

/// Pointwise intervals plus the multiplier-bootstrap uniform band on `grid`.
pub fn uniform_band(
    fit: &LpFit,
    cov: &CoefCovariance,
    grid: &[f64],
    draws: usize,
    alpha: f64,
    delta: f64,
    seed: u64,
) -> Result<IrfCurve> {
    check_alpha(alpha)?;
    if draws < 100 {
        return Err(Error::Config(format!("at least 100 bootstrap draws required, got {draws}")));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty evaluation grid".into()));
    }
    let j = fit.sieve_dim();
    let root = linalg::psd_sqrt(&cov.v)?;
    let mut phi = DMatrix::zeros(grid.len(), j);
    for (r, &z) in grid.iter().enumerate() {
        let (start, vals) = fit.basis.eval_local(z);
        for (k, v) in vals.iter().enumerate() {
            phi[(r, start + k)] = *v;
        }
    }
    let loadings = &phi * &root;
    let crit = sup_critical_value(&loadings, draws, alpha, seed);
    let pointwise = pointwise_ci(fit, cov, grid, alpha, delta)?;
    let estimate: Vec<f64> = pointwise.iter().map(|i| i.center).collect();
    let half = (crit * delta).abs();
    Ok(IrfCurve {
        horizon: fit.horizon,
        delta,
        alpha,
        draws,
        seed,
        grid: grid.to_vec(),
        pointwise_se: pointwise.iter().map(|i| i.se).collect(),
        pointwise_lo: pointwise.iter().map(|i| i.lo).collect(),
        pointwise_hi: pointwise.iter().map(|i| i.hi).collect(),
        band_lo: estimate.iter().map(|e| e - half).collect(),
        band_hi: estimate.iter().map(|e| e + half).collect(),
        estimate,
        critical_value: crit,
    })
}

/// Full inference chain with the default HAC lag.
pub fn covariance_for(fit: &LpFit, lag: Option<usize>) -> Result<(HacEstimate, CoefCovariance)> {
    let scores = score_process(fit)?;
    let hac = bartlett_hac(&scores, lag, fit.n)?;
    let cov = coef_covariance(&hac, fit)?;
    Ok((hac, cov))
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lag_at_reference_size() {
        assert_eq!(default_lag(500 * 200), 18);
        assert_eq!(default_lag(500 * 199), 18);
    }

    #[test]
    fn bartlett_weights_at_four() {
        assert_eq!(bartlett_weights(4), vec![0.8, 0.6, 0.4, 0.2]);
    }

    #[test]
    fn zero_lag_is_gamma0() {
        let s = ScoreSeries {
            scores: DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]),
        };
        let hac = bartlett_hac(&s, Some(0), 6).unwrap();
        let g0 = s.scores.transpose() * &s.scores / 6.0;
        assert!((hac.omega - g0).abs().max() < 1e-15);
        assert!(bartlett_hac(&s, Some(3), 6).is_err());
    }

    #[test]
    fn sandwich_cancels() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let cov = sandwich(&a, &a, 10).unwrap();
        let expected = a.clone().try_inverse().unwrap() / 10.0;
        assert!((&cov.v - expected).abs().max() < 1e-14);
        let doubled = sandwich(&a, &a, 20).unwrap();
        assert!((&cov.v * 0.5 - doubled.v).abs().max() < 1e-15);
    }

    #[test]
    fn scalar_band_matches_normal_quantile() {
        let loadings = DMatrix::from_element(1, 1, 1.0);
        let c = sup_critical_value(&loadings, 100_000, 0.05, 42);
        assert!((c / 1.959_963_984_540_054 - 1.0).abs() < 0.02);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(-4.65, 4.65, 500);
        assert_eq!(g.len(), 500);
        assert_eq!(g[0], -4.65);
        assert_eq!(g[499], 4.65);
    }
}
