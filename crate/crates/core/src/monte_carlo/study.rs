//! Replication study: simulate, select, fit, infer, score.
//!
//! A replication is the unit of work and of failure. [`run_replication`] is a
//! pure function of the configuration and the replication index, so callers
//! may schedule replications in any order or on any number of threads and
//! hand the records to [`McResult::from_records`].

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::inference::{covariance_for, linspace, uniform_band};
use crate::lp::{evaluate_irf, fit_linear_lp, Solver};
use crate::panel::{build_regression_sample, OutcomeMode};
use crate::rng::derive_seed;
use crate::selection::{select_and_fit, FitOptions, Selector, SelectorKind};

use super::dgp::{require_dgp1, simulate_dgp, true_irf, DgpSpec};
use super::metrics::{band_summary, integrated_squared_error, rimse_from_ise};

/// Equally spaced evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 500,
            lo: -4.65,
            hi: 4.65,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub reps: usize,
    pub n_units: Vec<usize>,
    pub n_periods: Vec<usize>,
    pub horizons: Vec<usize>,
    /// Shock sizes as multiples of the shock standard deviation (which is 1).
    pub deltas: Vec<f64>,
    pub selectors: Vec<Selector>,
    /// Bootstrap draws per band.
    pub draws: usize,
    pub alpha: f64,
    /// Grid for RIMSE.
    pub rimse_grid: GridSpec,
    /// Points of the band grid, spread over the sample range of the state.
    pub band_points: usize,
    pub with_intermediate: bool,
    pub seed: u64,
    pub dgp: DgpSpec,
    pub solver: Solver,
    pub compute_rimse: bool,
    pub compute_bands: bool,
    /// Also fit the linear interaction LP and score its RIMSE.
    pub linear_benchmark: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            reps: 300,
            n_units: alloc::vec![500],
            n_periods: alloc::vec![200],
            horizons: alloc::vec![0],
            deltas: alloc::vec![1.0],
            selectors: alloc::vec![Selector::Aic(crate::selection::default_candidates())],
            draws: 2000,
            alpha: 0.05,
            rimse_grid: GridSpec::default(),
            band_points: 500,
            with_intermediate: true,
            seed: 0,
            dgp: DgpSpec::default(),
            solver: Solver::Gram,
            compute_rimse: true,
            compute_bands: true,
            linear_benchmark: true,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.into()));
        if self.reps == 0 {
            return cfg("reps must be at least 1");
        }
        if self.n_units.is_empty() || self.n_periods.is_empty() || self.horizons.is_empty() {
            return cfg("N, T and horizon lists must be nonempty");
        }
        if self.selectors.is_empty() {
            return cfg("at least one selector is required");
        }
        for (k, s) in self.selectors.iter().enumerate() {
            if self.selectors[..k].iter().any(|o| o.kind() == s.kind()) {
                return Err(Error::Config(format!("selector {} listed twice", s.kind().name())));
            }
        }
        if self.compute_rimse {
            if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
                return cfg("deltas must be positive");
            }
            let g = self.rimse_grid;
            if g.points < 2 || !(g.lo < g.hi) {
                return cfg("RIMSE grid needs two or more points on a nonempty interval");
            }
        }
        if self.compute_bands {
            if !(self.alpha > 0.0 && self.alpha < 1.0) {
                return cfg("alpha must lie in (0, 1)");
            }
            if self.draws < 100 {
                return cfg("at least 100 bootstrap draws required");
            }
            if self.band_points < 2 {
                return cfg("band grid needs two or more points");
            }
        }
        self.dgp.validate()?;
        require_dgp1(&self.dgp)
    }

    /// `(N, T)` cells in the order they are run and reported.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.n_units {
            for &t in &self.n_periods {
                out.push((n, t));
            }
        }
        out
    }

    fn estimators(&self) -> Vec<Estimator> {
        let mut out: Vec<Estimator> = self.selectors.iter().map(|s| Estimator::Sieve(s.kind())).collect();
        if self.linear_benchmark && self.compute_rimse {
            out.push(Estimator::Linear);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Sieve(SelectorKind),
    Linear,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Sieve(SelectorKind::Aic) => "sieve-aic",
            Estimator::Sieve(SelectorKind::Gcv) => "sieve-gcv",
            Estimator::Sieve(SelectorKind::Lasso) => "sieve-lasso",
            Estimator::Sieve(SelectorKind::Oracle) => "sieve-oracle",
            Estimator::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRecord {
    pub covered: bool,
    pub width: f64,
    pub critical_value: f64,
}

/// Metrics of one estimator at one `(N, T, h)` in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub n_units: usize,
    pub n_periods: usize,
    pub horizon: usize,
    pub estimator: Estimator,
    pub j_hat: Option<usize>,
    /// Integrated squared error per configured delta (empty when RIMSE is off).
    pub ise: Vec<f64>,
    pub band: Option<BandRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub outcome: core::result::Result<Vec<CellRecord>, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RimseRow {
    pub n_units: usize,
    pub n_periods: usize,
    pub horizon: usize,
    pub delta: f64,
    pub estimator: Estimator,
    pub rimse: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub selector: SelectorKind,
    pub n_units: usize,
    pub n_periods: usize,
    pub horizon: usize,
    pub coverage: f64,
    pub width: f64,
    pub mean_j_hat: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub rimse: Vec<RimseRow>,
    pub coverage: Vec<CoverageRow>,
    /// Sorted by replication index.
    pub records: Vec<ReplicationRecord>,
    pub failures: usize,
}

/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_SHARE: f64 = 0.05;

/// Runs every `(N, T, h, estimator)` combination for replication `rep`.
pub fn run_replication(config: &McConfig, rep: usize) -> ReplicationRecord {
    ReplicationRecord {
        rep,
        outcome: replicate(config, rep),
    }
}

fn replicate(config: &McConfig, rep: usize) -> Result<Vec<CellRecord>> {
    let opts = FitOptions {
        with_intermediate: config.with_intermediate,
        solver: config.solver,
    };
    let rimse_grid = config.rimse_grid.points();
    let g = &config.dgp.g;
    let rho = config.dgp.rho;
    let mut out = Vec::new();
    for (cell, (n, t)) in config.cells().into_iter().enumerate() {
        let panel_seed = derive_seed(config.seed, &[rep as u64, cell as u64]);
        let panel = simulate_dgp(&config.dgp, n, t, panel_seed)?;
        for &h in &config.horizons {
            let sample = build_regression_sample(&panel, h, OutcomeMode::Level, config.with_intermediate)?;
            let truth: Vec<Vec<f64>> = config
                .deltas
                .iter()
                .map(|&d| rimse_grid.iter().map(|&z| true_irf(g, h, d, z, rho)).collect())
                .collect();
            for (k, selector) in config.selectors.iter().enumerate() {
                let (sel, fit) = select_and_fit(&sample, selector, opts)?;
                let mut ise = Vec::new();
                if config.compute_rimse {
                    let unit = evaluate_irf(&fit, &rimse_grid, 1.0);
                    for (&d, tr) in config.deltas.iter().zip(&truth) {
                        let est: Vec<f64> = unit.iter().map(|v| v * d).collect();
                        ise.push(integrated_squared_error(&est, tr, &rimse_grid)?);
                    }
                }
                let band = if config.compute_bands {
                    let (_, cov) = covariance_for(&fit, None)?;
                    let (lo, hi) = sample.state_range();
                    let grid = linspace(lo, hi, config.band_points);
                    let seed = derive_seed(config.seed, &[rep as u64, cell as u64, h as u64, k as u64]);
                    let curve = uniform_band(&fit, &cov, &grid, config.draws, config.alpha, 1.0, seed)?;
                    let tr: Vec<f64> = grid.iter().map(|&z| true_irf(g, h, 1.0, z, rho)).collect();
                    let (covered, width) = band_summary(&curve.band_lo, &curve.band_hi, &tr)?;
                    Some(BandRecord {
                        covered,
                        width,
                        critical_value: curve.critical_value,
                    })
                } else {
                    None
                };
                out.push(CellRecord {
                    n_units: n,
                    n_periods: t,
                    horizon: h,
                    estimator: Estimator::Sieve(selector.kind()),
                    j_hat: Some(sel.j_hat),
                    ise,
                    band,
                });
            }
            if config.linear_benchmark && config.compute_rimse {
                let lin = fit_linear_lp(&sample, config.solver)?;
                let mut ise = Vec::new();
                for (&d, tr) in config.deltas.iter().zip(&truth) {
                    let est: Vec<f64> = rimse_grid.iter().map(|&z| lin.irf(z, d)).collect();
                    ise.push(integrated_squared_error(&est, tr, &rimse_grid)?);
                }
                out.push(CellRecord {
                    n_units: n,
                    n_periods: t,
                    horizon: h,
                    estimator: Estimator::Linear,
                    j_hat: None,
                    ise,
                    band: None,
                });
            }
        }
    }
    Ok(out)
}

impl McResult {
    /// Aggregates replication records in replication-index order.
    ///
    /// The result does not depend on the order of `records`.
    pub fn from_records(config: &McConfig, mut records: Vec<ReplicationRecord>) -> Result<Self> {
        config.validate()?;
        records.sort_by_key(|r| r.rep);
        if records.len() != config.reps || records.iter().enumerate().any(|(k, r)| r.rep != k) {
            return Err(Error::Study(format!(
                "expected one record per replication 0..{}, got {}",
                config.reps,
                records.len()
            )));
        }
        let failures = records.iter().filter(|r| r.outcome.is_err()).count();
        if failures as f64 > MAX_FAILURE_SHARE * config.reps as f64 {
            let first = records
                .iter()
                .find_map(|r| r.outcome.as_ref().err().map(|e| (r.rep, e.clone())))
                .expect("a failure exists");
            return Err(Error::Study(format!(
                "{failures} of {} replications failed (limit {:.0}%); first at rep {}: {}",
                config.reps,
                MAX_FAILURE_SHARE * 100.0,
                first.0,
                first.1
            )));
        }
        let ok: Vec<&Vec<CellRecord>> = records.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let find = |cells: &'_ Vec<CellRecord>, n, t, h, e| -> Option<CellRecord> {
            cells
                .iter()
                .find(|c| c.n_units == n && c.n_periods == t && c.horizon == h && c.estimator == e)
                .cloned()
        };

        let mut rimse = Vec::new();
        let mut coverage = Vec::new();
        for (n, t) in config.cells() {
            for &h in &config.horizons {
                for est in config.estimators() {
                    let cells = ok
                        .iter()
                        .map(|c| {
                            find(c, n, t, h, est)
                                .ok_or_else(|| Error::Study(format!("missing record for {}", est.name())))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    if config.compute_rimse {
                        for (k, &delta) in config.deltas.iter().enumerate() {
                            let ise: Vec<f64> = cells.iter().map(|c| c.ise[k]).collect();
                            rimse.push(RimseRow {
                                n_units: n,
                                n_periods: t,
                                horizon: h,
                                delta,
                                estimator: est,
                                rimse: rimse_from_ise(&ise)?,
                                reps: cells.len(),
                            });
                        }
                    }
                    if let (Estimator::Sieve(kind), true) = (est, config.compute_bands) {
                        let r = cells.len() as f64;
                        let mut hits = 0usize;
                        let mut width = 0.0;
                        let mut j = 0.0;
                        for c in &cells {
                            let b = c.band.ok_or_else(|| Error::Study("missing band record".into()))?;
                            hits += b.covered as usize;
                            width += b.width;
                            j += c.j_hat.unwrap_or(0) as f64;
                        }
                        coverage.push(CoverageRow {
                            selector: kind,
                            n_units: n,
                            n_periods: t,
                            horizon: h,
                            coverage: hits as f64 / r,
                            width: width / r,
                            mean_j_hat: j / r,
                            reps: cells.len(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            rimse,
            coverage,
            records,
            failures,
        })
    }

    pub fn rimse_at(&self, n: usize, t: usize, h: usize, delta: f64, est: Estimator) -> Option<&RimseRow> {
        self.rimse.iter().find(|r| {
            r.n_units == n && r.n_periods == t && r.horizon == h && r.delta == delta && r.estimator == est
        })
    }

    pub fn coverage_at(&self, sel: SelectorKind, n: usize, t: usize, h: usize) -> Option<&CoverageRow> {
        self.coverage
            .iter()
            .find(|r| r.selector == sel && r.n_units == n && r.n_periods == t && r.horizon == h)
    }
}

/// Runs all replications in index order on the calling thread.
pub fn run_study(config: &McConfig) -> Result<McResult> {
    config.validate()?;
    let records = (0..config.reps).map(|r| run_replication(config, r)).collect();
    McResult::from_records(config, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny() -> McConfig {
        McConfig {
            reps: 2,
            n_units: vec![20],
            n_periods: vec![30],
            horizons: vec![0, 2],
            deltas: vec![0.5, 1.0, 2.0],
            selectors: vec![Selector::Aic(vec![4, 5, 6]), Selector::Oracle(4)],
            draws: 200,
            band_points: 50,
            rimse_grid: GridSpec {
                points: 60,
                lo: -4.65,
                hi: 4.65,
            },
            dgp: DgpSpec {
                burn_in: 50,
                ..DgpSpec::default()
            },
            seed: 11,
            ..McConfig::default()
        }
    }

    #[test]
    fn tables_cover_every_key() {
        let cfg = tiny();
        let res = run_study(&cfg).unwrap();
        assert_eq!(res.failures, 0);
        // 2 horizons × 3 estimators × 3 deltas
        assert_eq!(res.rimse.len(), 18);
        // 2 horizons × 2 selectors
        assert_eq!(res.coverage.len(), 4);
        for row in &res.coverage {
            assert!((0.0..=1.0).contains(&row.coverage));
            assert!(row.width > 0.0);
        }
    }

    #[test]
    fn single_rep_tables_equal_that_rep() {
        let cfg = McConfig { reps: 1, ..tiny() };
        let res = run_study(&cfg).unwrap();
        let cells = res.records[0].outcome.as_ref().unwrap();
        for c in cells {
            for (k, &d) in cfg.deltas.iter().enumerate() {
                let row = res.rimse_at(20, 30, c.horizon, d, c.estimator).unwrap();
                assert_eq!(row.rimse, libm::sqrt(c.ise[k]));
            }
            if let (Estimator::Sieve(kind), Some(b)) = (c.estimator, c.band) {
                let row = res.coverage_at(kind, 20, 30, c.horizon).unwrap();
                assert_eq!(row.width, b.width);
                assert_eq!(row.coverage, b.covered as u8 as f64);
            }
        }
    }

    #[test]
    fn record_order_does_not_matter() {
        let cfg = McConfig { reps: 3, ..tiny() };
        let recs: Vec<_> = (0..3).map(|r| run_replication(&cfg, r)).collect();
        let a = McResult::from_records(&cfg, recs.clone()).unwrap();
        let mut rev = recs;
        rev.reverse();
        assert_eq!(a, McResult::from_records(&cfg, rev).unwrap());
    }

    #[test]
    fn too_many_failures_is_study_error() {
        let cfg = tiny();
        let mut recs: Vec<_> = (0..2).map(|r| run_replication(&cfg, r)).collect();
        recs[1].outcome = Err(Error::Numerical("injected".into()));
        assert!(matches!(McResult::from_records(&cfg, recs), Err(Error::Study(_))));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            McConfig { reps: 0, ..tiny() },
            McConfig { deltas: vec![0.0], ..tiny() },
            McConfig {
                selectors: vec![Selector::Oracle(4), Selector::Oracle(5)],
                ..tiny()
            },
        ];
        for cfg in &bad {
            assert!(matches!(run_study(cfg), Err(Error::Config(_))));
        }
    }
}
