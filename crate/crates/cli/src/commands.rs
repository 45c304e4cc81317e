//! Subcommand implementations. Each returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use state_lp_core::aggregate::aggregate_response;
use state_lp_core::inference::{covariance_for, linspace, uniform_band, IrfCurve};
use state_lp_core::lp::Solver;
use state_lp_core::misspec::{analytic_example, interaction_slope, linear_estimand_on_grid, omega_empirical};
use state_lp_core::monte_carlo::{simulate_dgp, trapezoid, DgpSpec, McConfig, McResult};
use state_lp_core::panel::{build_regression_sample, OutcomeMode, PanelDataset};
use state_lp_core::rng::derive_seed;
use state_lp_core::selection::{select_and_fit, FitOptions, SelectionResult, Selector};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{csv_bytes, json_bytes, num, OutDir};
use crate::panel_io::{load_panel, take_control, write_panel, PanelSchema};
use crate::parallel::{pool, run_study_parallel};

pub const IRF_HEADER: [&str; 7] = ["z", "estimate", "se", "ci_lo", "ci_hi", "band_lo", "band_hi"];
pub const RIMSE_HEADER: [&str; 7] = ["n_units", "n_periods", "horizon", "delta", "estimator", "rimse", "reps"];
pub const COVERAGE_HEADER: [&str; 8] =
    ["selector", "n_units", "n_periods", "horizon", "coverage", "width", "mean_j_hat", "reps"];
pub const WEIGHT_HEADER: [&str; 4] = ["z", "omega", "gprime", "integrand"];
pub const AGGREGATE_HEADER: [&str; 3] = ["period", "response", "response_ma4"];

fn read_panel(path: &Path, schema: &PanelSchema) -> CliResult<PanelDataset> {
    let file = fs::File::open(path).map_err(|e| CliError::read(path, e))?;
    Ok(load_panel(std::io::BufReader::new(file), schema)?)
}

fn mode_name(mode: OutcomeMode) -> &'static str {
    match mode {
        OutcomeMode::Level => "level",
        OutcomeMode::CumulativeFromT => "cum-t",
        OutcomeMode::CumulativeFromTMinus1 => "cum-t1",
    }
}

fn solver_name(solver: Solver) -> &'static str {
    match solver {
        Solver::Qr => "qr",
        Solver::Gram => "gram",
    }
}

fn selector_json(selector: &Selector) -> Value {
    match selector {
        Selector::Aic(c) | Selector::Gcv(c) => json!({"kind": selector.kind().name(), "candidates": c}),
        Selector::Oracle(j) => json!({"kind": "oracle", "j": j}),
        Selector::Lasso(o) => json!({
            "kind": "lasso",
            "max_dim": o.max_dim,
            "folds": o.folds,
            "n_lambdas": o.n_lambdas,
            "lambda_min_ratio": o.lambda_min_ratio,
        }),
    }
}

fn trace_json(sel: &SelectionResult) -> Value {
    let candidates: Vec<Value> = sel
        .candidates
        .iter()
        .map(|c| {
            json!({
                "requested": c.requested,
                "dim": c.dim,
                "n_params": c.n_params,
                "ssr": c.ssr,
                "criterion": c.criterion,
                "skipped": c.skipped,
            })
        })
        .collect();
    let lasso = sel.lasso.as_ref().map(|l| {
        json!({
            "max_dim": l.max_dim,
            "folds": l.folds,
            "lambdas": l.lambdas,
            "nonzero_sieve": l.nonzero_sieve,
            "cv_loss": l.cv_loss,
            "lambda_hat": l.lambda_hat,
            "nonzero_at_hat": l.nonzero_at_hat,
        })
    });
    json!({"selector": sel.selector.name(), "candidates": candidates, "lasso": lasso})
}

fn finish(out: &mut OutDir, manifest: RunManifest) -> CliResult<Vec<PathBuf>> {
    let body = json_bytes(&manifest.to_json()?);
    out.write("manifest.json", &body)?;
    Ok(out.written.clone())
}

/// Settings for `estimate`.
#[derive(Debug, Clone)]
pub struct EstimateArgs {
    pub panel: PathBuf,
    pub schema: PanelSchema,
    pub horizons: Vec<usize>,
    pub selector: Selector,
    pub alpha: f64,
    pub draws: usize,
    /// Grid size and optional bounds; the default bounds are the sample's state range.
    pub grid: (usize, Option<(f64, f64)>),
    pub mode: OutcomeMode,
    pub intermediate: bool,
    pub delta: f64,
    pub hac_lag: Option<usize>,
    pub solver: Solver,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

struct HorizonOutput {
    horizon: usize,
    selection: SelectionResult,
    n: usize,
    lag: usize,
    curve: IrfCurve,
}

fn estimate_horizon(panel: &PanelDataset, args: &EstimateArgs, h: usize) -> CliResult<HorizonOutput> {
    let sample = build_regression_sample(panel, h, args.mode, args.intermediate)?;
    let opts = FitOptions {
        with_intermediate: args.intermediate,
        solver: args.solver,
    };
    let (selection, fit) = select_and_fit(&sample, &args.selector, opts)?;
    let (hac, cov) = covariance_for(&fit, args.hac_lag)?;
    let (lo, hi) = args.grid.1.unwrap_or_else(|| sample.state_range());
    let grid = linspace(lo, hi, args.grid.0);
    let seed = derive_seed(args.seed, &[h as u64]);
    let curve = uniform_band(&fit, &cov, &grid, args.draws, args.alpha, args.delta, seed)?;
    Ok(HorizonOutput {
        horizon: h,
        selection,
        n: fit.n,
        lag: hac.lag,
        curve,
    })
}

/// Fits every horizon and writes `irf_h{h}.csv`, `summary.json` and `manifest.json`.
pub fn cmd_estimate(args: &EstimateArgs) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let panel = read_panel(&args.panel, &args.schema)?;
    let results: Vec<CliResult<HorizonOutput>> = pool(args.threads)?.install(|| {
        args.horizons
            .par_iter()
            .map(|&h| estimate_horizon(&panel, args, h))
            .collect()
    });
    let results = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    let mut out = OutDir::create(&args.out)?;
    let mut horizons = Vec::new();
    for r in &results {
        let c = &r.curve;
        let rows = (0..c.grid.len()).map(|k| {
            vec![
                num(c.grid[k]),
                num(c.estimate[k]),
                num(c.pointwise_se[k] * args.delta.abs()),
                num(c.pointwise_lo[k]),
                num(c.pointwise_hi[k]),
                num(c.band_lo[k]),
                num(c.band_hi[k]),
            ]
        });
        out.write(&format!("irf_h{}.csv", r.horizon), &csv_bytes(&IRF_HEADER, rows))?;
        horizons.push(json!({
            "horizon": r.horizon,
            "j_hat": r.selection.j_hat,
            "n_obs": r.n,
            "hac_lag": r.lag,
            "critical_value": c.critical_value,
            "band_seed": c.seed,
            "mean_band_width": c.mean_band_width(),
            "selection": trace_json(&r.selection),
        }));
    }
    out.write("summary.json", &json_bytes(&json!({ "horizons": horizons })))?;

    let config = json!({
        "horizons": args.horizons,
        "selector": selector_json(&args.selector),
        "alpha": args.alpha,
        "bootstrap": args.draws,
        "grid_points": args.grid.0,
        "grid_range": args.grid.1.map(|(a, b)| vec![a, b]),
        "mode": mode_name(args.mode),
        "intermediate": args.intermediate,
        "delta": args.delta,
        "hac_lag": args.hac_lag,
        "solver": solver_name(args.solver),
        "columns": {
            "unit": args.schema.unit,
            "time": args.schema.time,
            "outcome": args.schema.outcome,
            "shock": args.schema.shock,
            "state": args.schema.state,
            "controls": panel.control_names,
        },
    });
    let manifest = RunManifest {
        command: "estimate".into(),
        config,
        seed: args.seed,
        elapsed: started.elapsed(),
        inputs: vec![args.panel.clone()],
        outputs: out.written.clone(),
    };
    finish(&mut out, manifest)
}

/// Settings for `simulate`.
#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub config_path: PathBuf,
    pub config: McConfig,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

pub fn rimse_csv(result: &McResult) -> Vec<u8> {
    let rows = result.rimse.iter().map(|r| {
        vec![
            r.n_units.to_string(),
            r.n_periods.to_string(),
            r.horizon.to_string(),
            num(r.delta),
            r.estimator.name().to_string(),
            num(r.rimse),
            r.reps.to_string(),
        ]
    });
    csv_bytes(&RIMSE_HEADER, rows)
}

pub fn coverage_csv(result: &McResult) -> Vec<u8> {
    let rows = result.coverage.iter().map(|r| {
        vec![
            r.selector.name().to_string(),
            r.n_units.to_string(),
            r.n_periods.to_string(),
            r.horizon.to_string(),
            num(r.coverage),
            num(r.width),
            num(r.mean_j_hat),
            r.reps.to_string(),
        ]
    });
    csv_bytes(&COVERAGE_HEADER, rows)
}

fn study_json(c: &McConfig) -> Value {
    json!({
        "reps": c.reps,
        "n_units": c.n_units,
        "n_periods": c.n_periods,
        "horizons": c.horizons,
        "deltas": c.deltas,
        "selectors": c.selectors.iter().map(selector_json).collect::<Vec<_>>(),
        "bootstrap": c.draws,
        "alpha": c.alpha,
        "rimse_grid": {"points": c.rimse_grid.points, "lo": c.rimse_grid.lo, "hi": c.rimse_grid.hi},
        "band_points": c.band_points,
        "intermediate": c.with_intermediate,
        "rimse": c.compute_rimse,
        "bands": c.compute_bands,
        "linear_benchmark": c.linear_benchmark,
        "dgp": {
            "g": format!("{:?}", c.dgp.g).to_lowercase(),
            "rho": c.dgp.rho,
            "mu_var": c.dgp.mu_var,
            "xi_ar": c.dgp.xi_ar,
            "xi_innov_sd": c.dgp.xi_innov_sd,
            "burn_in": c.dgp.burn_in,
        },
        "solver": solver_name(c.solver),
    })
}

/// Runs the study and writes `rimse.csv`, `coverage.csv` and `manifest.json`.
pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<(McResult, Vec<PathBuf>)> {
    let started = Instant::now();
    let result = run_study_parallel(&args.config, args.threads)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("rimse.csv", &rimse_csv(&result))?;
    out.write("coverage.csv", &coverage_csv(&result))?;
    let mut config = study_json(&args.config);
    config["failed_replications"] = json!(result.failures);
    let manifest = RunManifest {
        command: "simulate".into(),
        config,
        seed: args.config.seed,
        elapsed: started.elapsed(),
        inputs: vec![args.config_path.clone()],
        outputs: out.written.clone(),
    };
    let paths = finish(&mut out, manifest)?;
    Ok((result, paths))
}

/// Settings for `simulate-panel`.
#[derive(Debug, Clone)]
pub struct SimulatePanelArgs {
    pub dgp: DgpSpec,
    pub n_units: usize,
    pub n_periods: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Writes one simulated panel as CSV.
pub fn cmd_simulate_panel(args: &SimulatePanelArgs) -> CliResult<PathBuf> {
    let panel = simulate_dgp(&args.dgp, args.n_units, args.n_periods, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    }
    let file = fs::File::create(&args.out).map_err(|e| CliError::write(&args.out, e))?;
    write_panel(std::io::BufWriter::new(file), &panel).map_err(|e| CliError::write(&args.out, e))?;
    Ok(args.out.clone())
}

/// Source of the weight curve for `diagnose-linear`.
#[derive(Debug, Clone)]
pub enum DiagnoseSource {
    AnalyticExample,
    Panel {
        path: PathBuf,
        schema: PanelSchema,
        horizon: usize,
        mode: OutcomeMode,
        /// Coefficients `c_0, c_1, …` of a polynomial `g′(z) = Σ c_k z^k`.
        gprime_poly: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct DiagnoseArgs {
    pub source: DiagnoseSource,
    pub grid: (usize, Option<(f64, f64)>),
    pub out: PathBuf,
}

/// Figures reported by `diagnose-linear`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseReport {
    /// `∫ ω g′` (adaptive quadrature for the analytic case, trapezoid otherwise).
    pub beta: Option<f64>,
    /// Interaction slope estimated from the panel.
    pub beta_hat: Option<f64>,
    pub omega_integral: f64,
    pub sign_changes: Vec<f64>,
}

fn poly(coef: &[f64], z: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

/// Writes `weights.csv`, `diagnose.json` and `manifest.json`.
pub fn cmd_diagnose_linear(args: &DiagnoseArgs) -> CliResult<(DiagnoseReport, Vec<PathBuf>)> {
    let started = Instant::now();
    let mut out_rows: Vec<Vec<String>> = Vec::new();
    let (report, header, summary, inputs): (DiagnoseReport, &[&str], Value, Vec<PathBuf>) = match &args.source {
        DiagnoseSource::AnalyticExample => {
            if args.grid.1.is_some() {
                return Err(CliError::Config("the worked example is defined on [1, 3]; pass only a point count".into()));
            }
            let ex = analytic_example(args.grid.0)?;
            for k in 0..ex.weights.grid.len() {
                out_rows.push(vec![
                    num(ex.weights.grid[k]),
                    num(ex.weights.omega[k]),
                    num(ex.gprime[k]),
                    num(ex.integrand[k]),
                ]);
            }
            let trapezoid_beta = trapezoid(&ex.weights.grid, &ex.integrand);
            let report = DiagnoseReport {
                beta: Some(ex.beta.value),
                beta_hat: None,
                omega_integral: ex.omega_integral.value,
                sign_changes: ex.omega_roots.clone(),
            };
            let summary = json!({
                "source": "analytic-example",
                "beta": ex.beta.value,
                "beta_quadrature_error": ex.beta.error,
                "beta_trapezoid": trapezoid_beta,
                "omega_integral": ex.omega_integral.value,
                "omega_integral_error": ex.omega_integral.error,
                "omega_roots": ex.omega_roots,
                "gprime_positive_on": ex.gprime_positive_on.iter().map(|(a, b)| vec![*a, *b]).collect::<Vec<_>>(),
                "beta_negative_while_gprime_positive_somewhere": ex.beta.value < 0.0,
            });
            (report, &WEIGHT_HEADER, summary, Vec::new())
        }
        DiagnoseSource::Panel {
            path,
            schema,
            horizon,
            mode,
            gprime_poly,
        } => {
            let panel = read_panel(path, schema)?;
            let sample = build_regression_sample(&panel, *horizon, *mode, false)?;
            let (lo, hi) = args.grid.1.unwrap_or_else(|| sample.state_range());
            let grid = linspace(lo, hi, args.grid.0);
            let curve = omega_empirical(&sample.state_at_base, &sample.shock_at_base, &grid)?;
            let beta_hat = interaction_slope(&sample.state_at_base, &sample.shock_at_base, &sample.response)?;
            let (beta, header): (Option<f64>, &[&str]) = match gprime_poly {
                Some(c) => {
                    let gp: Vec<f64> = grid.iter().map(|&z| poly(c, z)).collect();
                    for k in 0..grid.len() {
                        out_rows.push(vec![num(grid[k]), num(curve.omega[k]), num(gp[k]), num(curve.omega[k] * gp[k])]);
                    }
                    (Some(linear_estimand_on_grid(&curve, &gp)?), &WEIGHT_HEADER)
                }
                None => {
                    for k in 0..grid.len() {
                        out_rows.push(vec![num(grid[k]), num(curve.omega[k])]);
                    }
                    (None, &WEIGHT_HEADER[..2])
                }
            };
            let report = DiagnoseReport {
                beta,
                beta_hat: Some(beta_hat),
                omega_integral: curve.integral,
                sign_changes: curve.sign_changes.clone(),
            };
            let summary = json!({
                "source": "panel",
                "horizon": horizon,
                "mode": mode_name(*mode),
                "n_obs": sample.n(),
                "beta": beta,
                "beta_hat": beta_hat,
                "omega_integral": curve.integral,
                "omega_sign_changes": curve.sign_changes,
                "gprime_poly": gprime_poly,
            });
            (report, header, summary, vec![path.clone()])
        }
    };
    let mut out = OutDir::create(&args.out)?;
    out.write("weights.csv", &csv_bytes(header, out_rows))?;
    out.write("diagnose.json", &json_bytes(&summary))?;
    let manifest = RunManifest {
        command: "diagnose-linear".into(),
        config: json!({"grid_points": args.grid.0, "grid_range": args.grid.1.map(|(a, b)| vec![a, b])}),
        seed: 0,
        elapsed: started.elapsed(),
        inputs,
        outputs: out.written.clone(),
    };
    let paths = finish(&mut out, manifest)?;
    Ok((report, paths))
}

/// Settings for `aggregate`.
#[derive(Debug, Clone)]
pub struct AggregateArgs {
    pub panel: PathBuf,
    pub schema: PanelSchema,
    /// Extra panel column holding the nonnegative weights `K`.
    pub weights: String,
    pub horizon: usize,
    pub selector: Selector,
    pub mode: OutcomeMode,
    pub intermediate: bool,
    pub solver: Solver,
    pub out: PathBuf,
}

/// Fits the horizon-`h` response, weights it across units in each period
/// and writes `aggregate_h{h}.csv` and `manifest.json`.
pub fn cmd_aggregate(args: &AggregateArgs) -> CliResult<Vec<PathBuf>> {
    let started = Instant::now();
    let full = read_panel(&args.panel, &args.schema)?;
    let (panel, k) = take_control(&full, &args.weights)?;
    let sample = build_regression_sample(&panel, args.horizon, args.mode, args.intermediate)?;
    let opts = FitOptions {
        with_intermediate: args.intermediate,
        solver: args.solver,
    };
    let (selection, fit) = select_and_fit(&sample, &args.selector, opts)?;
    let n = panel.n_units();
    let tt = panel.n_periods();
    let periods = panel.time_index[1..].to_vec();
    let states: Vec<Vec<f64>> = (1..tt).map(|t| (0..n).map(|i| panel.z(i, t - 1)).collect()).collect();
    let weights: Vec<Vec<f64>> = (1..tt).map(|t| (0..n).map(|i| k[i * tt + t - 1]).collect()).collect();
    let agg = aggregate_response(|z| fit.g_hat(z), &periods, &states, &weights)?;

    let mut out = OutDir::create(&args.out)?;
    let rows = (0..agg.periods.len()).map(|p| {
        vec![
            agg.periods[p].to_string(),
            num(agg.response[p]),
            agg.smoothed[p].map(num).unwrap_or_default(),
        ]
    });
    out.write(&format!("aggregate_h{}.csv", args.horizon), &csv_bytes(&AGGREGATE_HEADER, rows))?;
    let manifest = RunManifest {
        command: "aggregate".into(),
        config: json!({
            "horizon": args.horizon,
            "weights": args.weights,
            "selector": selector_json(&args.selector),
            "j_hat": selection.j_hat,
            "mode": mode_name(args.mode),
            "intermediate": args.intermediate,
            "solver": solver_name(args.solver),
        }),
        seed: 0,
        elapsed: started.elapsed(),
        inputs: vec![args.panel.clone()],
        outputs: out.written.clone(),
    };
    finish(&mut out, manifest)
}
