//! Flag value parsers and the key-value study configuration format.
//!
//! A study file holds one `key = value` pair per line; `#` starts a comment.
//! List values are comma separated, and integer lists also accept an
//! inclusive range `a..b`. Recognized keys:
//!
//! | key | value |
//! |---|---|
//! | `reps` | replications |
//! | `n_units`, `n_periods`, `horizons` | integer lists |
//! | `deltas` | shock sizes in shock standard deviations |
//! | `selectors` | any of `aic,gcv,lasso,oracle` |
//! | `oracle_j` | fixed dimension for `oracle` (default 4) |
//! | `candidates` | AIC/GCV search set (default `4..20`) |
//! | `lasso_max_dim`, `lasso_folds` | LASSO tuning |
//! | `bootstrap`, `alpha` | band draws and level |
//! | `rimse_grid` | `n[:lo:hi]` (default `500:-4.65:4.65`) |
//! | `band_points` | points on the sample state range |
//! | `intermediate`, `rimse`, `bands`, `linear_benchmark` | `on`/`off` |
//! | `seed` | master seed |
//! | `g` | `cubic` or `fourier` |
//! | `rho`, `mu_var`, `xi_ar`, `xi_innov_sd`, `burn_in` | design parameters |
//! | `solver` | `qr` or `gram` |

use state_lp_core::lp::Solver;
use state_lp_core::monte_carlo::{GFunction, GridSpec, McConfig};
use state_lp_core::panel::OutcomeMode;
use state_lp_core::selection::{default_candidates, LassoOptions, Selector};

use crate::error::{CliError, CliResult};

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("key `{key}`: {msg}"))
}

pub fn parse_usize(key: &str, v: &str) -> CliResult<usize> {
    v.trim().parse().map_err(|_| bad(key, format!("`{v}` is not a nonnegative integer")))
}

pub fn parse_f64(key: &str, v: &str) -> CliResult<f64> {
    let x: f64 = v.trim().parse().map_err(|_| bad(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(bad(key, format!("`{v}` is not finite")));
    }
    Ok(x)
}

/// Comma list of integers, each item optionally an inclusive range `a..b`.
pub fn parse_usize_list(key: &str, v: &str) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b) = (parse_usize(key, a)?, parse_usize(key, b)?);
            if a > b {
                return Err(bad(key, format!("empty range `{item}`")));
            }
            out.extend(a..=b);
        } else {
            out.push(parse_usize(key, item)?);
        }
    }
    if out.is_empty() {
        return Err(bad(key, "empty list"));
    }
    Ok(out)
}

pub fn parse_f64_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    let out: Vec<f64> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect::<CliResult<_>>()?;
    if out.is_empty() {
        return Err(bad(key, "empty list"));
    }
    Ok(out)
}

pub fn parse_switch(key: &str, v: &str) -> CliResult<bool> {
    match v.trim() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(bad(key, format!("`{other}` is not on/off"))),
    }
}

/// `n` or `n:lo:hi`; the bounds are `None` when omitted.
pub fn parse_grid(key: &str, v: &str) -> CliResult<(usize, Option<(f64, f64)>)> {
    let parts: Vec<&str> = v.split(':').collect();
    let (n, range) = match parts.as_slice() {
        [n] => (parse_usize(key, n)?, None),
        [n, lo, hi] => {
            let (lo, hi) = (parse_f64(key, lo)?, parse_f64(key, hi)?);
            if !(lo < hi) {
                return Err(bad(key, "grid needs lo < hi"));
            }
            (parse_usize(key, n)?, Some((lo, hi)))
        }
        _ => return Err(bad(key, format!("`{v}` is not n or n:lo:hi"))),
    };
    if n < 2 {
        return Err(bad(key, "grid needs at least two points"));
    }
    Ok((n, range))
}

pub fn parse_mode(key: &str, v: &str) -> CliResult<OutcomeMode> {
    match v.trim() {
        "level" => Ok(OutcomeMode::Level),
        "cum-t" => Ok(OutcomeMode::CumulativeFromT),
        "cum-t1" => Ok(OutcomeMode::CumulativeFromTMinus1),
        other => Err(bad(key, format!("`{other}` is not level, cum-t or cum-t1"))),
    }
}

pub fn parse_solver(key: &str, v: &str) -> CliResult<Solver> {
    match v.trim() {
        "qr" => Ok(Solver::Qr),
        "gram" => Ok(Solver::Gram),
        other => Err(bad(key, format!("`{other}` is not qr or gram"))),
    }
}

/// Selector settings gathered from flags or config keys.
#[derive(Debug, Clone)]
pub struct SelectorArgs {
    pub oracle_j: Option<usize>,
    pub candidates: Vec<usize>,
    pub lasso: LassoOptions,
}

impl Default for SelectorArgs {
    fn default() -> Self {
        Self {
            oracle_j: None,
            candidates: default_candidates(),
            lasso: LassoOptions::default(),
        }
    }
}

pub fn parse_selector(key: &str, name: &str, args: &SelectorArgs) -> CliResult<Selector> {
    match name.trim() {
        "aic" => Ok(Selector::Aic(args.candidates.clone())),
        "gcv" => Ok(Selector::Gcv(args.candidates.clone())),
        "lasso" => Ok(Selector::Lasso(args.lasso.clone())),
        "oracle" => args
            .oracle_j
            .map(Selector::Oracle)
            .ok_or_else(|| CliError::Config("selector `oracle` requires --oracle-j".into())),
        other => Err(bad(key, format!("unknown selector `{other}`"))),
    }
}

/// Parses a study file. Values for `selectors` are resolved after all
/// keys are read, so `oracle_j` and `candidates` may appear in any order.
pub fn parse_study(text: &str) -> CliResult<McConfig> {
    let mut cfg = McConfig::default();
    let mut sel = SelectorArgs {
        oracle_j: Some(4),
        ..SelectorArgs::default()
    };
    let mut selector_names: Option<Vec<String>> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected `key = value`", lineno + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "reps" => cfg.reps = parse_usize(key, value)?,
            "n_units" => cfg.n_units = parse_usize_list(key, value)?,
            "n_periods" => cfg.n_periods = parse_usize_list(key, value)?,
            "horizons" => cfg.horizons = parse_usize_list(key, value)?,
            "deltas" => cfg.deltas = parse_f64_list(key, value)?,
            "selectors" => {
                selector_names = Some(value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            }
            "oracle_j" => sel.oracle_j = Some(parse_usize(key, value)?),
            "candidates" => sel.candidates = parse_usize_list(key, value)?,
            "lasso_max_dim" => sel.lasso.max_dim = parse_usize(key, value)?,
            "lasso_folds" => sel.lasso.folds = parse_usize(key, value)?,
            "bootstrap" => cfg.draws = parse_usize(key, value)?,
            "alpha" => cfg.alpha = parse_f64(key, value)?,
            "rimse_grid" => {
                let (n, range) = parse_grid(key, value)?;
                let (lo, hi) = range.unwrap_or((cfg.rimse_grid.lo, cfg.rimse_grid.hi));
                cfg.rimse_grid = GridSpec { points: n, lo, hi };
            }
            "band_points" => cfg.band_points = parse_usize(key, value)?,
            "intermediate" => cfg.with_intermediate = parse_switch(key, value)?,
            "rimse" => cfg.compute_rimse = parse_switch(key, value)?,
            "bands" => cfg.compute_bands = parse_switch(key, value)?,
            "linear_benchmark" => cfg.linear_benchmark = parse_switch(key, value)?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad(key, format!("`{value}` is not a u64")))?,
            "g" => {
                cfg.dgp.g = match value {
                    "cubic" => GFunction::Cubic,
                    "fourier" => GFunction::Fourier,
                    other => return Err(bad(key, format!("`{other}` is not cubic or fourier"))),
                }
            }
            "rho" => cfg.dgp.rho = parse_f64(key, value)?,
            "mu_var" => cfg.dgp.mu_var = parse_f64(key, value)?,
            "xi_ar" => cfg.dgp.xi_ar = parse_f64(key, value)?,
            "xi_innov_sd" => cfg.dgp.xi_innov_sd = parse_f64(key, value)?,
            "burn_in" => cfg.dgp.burn_in = parse_usize(key, value)?,
            "solver" => cfg.solver = parse_solver(key, value)?,
            other => return Err(bad(other, "unknown key")),
        }
    }
    if let Some(names) = selector_names {
        cfg.selectors = names
            .iter()
            .map(|n| parse_selector("selectors", n, &sel))
            .collect::<CliResult<_>>()?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use state_lp_core::selection::SelectorKind;

    #[test]
    fn study_file_round_trip_of_fields() {
        let cfg = parse_study(
            "# toy\nreps = 2\nn_units = 20\nn_periods = 30, 40\nhorizons = 0..2\n\
             selectors = aic, oracle\noracle_j = 5\nbands = off\nrimse_grid = 50\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.reps, 2);
        assert_eq!(cfg.n_periods, vec![30, 40]);
        assert_eq!(cfg.horizons, vec![0, 1, 2]);
        assert_eq!(cfg.selectors[1], Selector::Oracle(5));
        assert_eq!(cfg.selectors[0].kind(), SelectorKind::Aic);
        assert!(!cfg.compute_bands);
        assert_eq!(cfg.rimse_grid.points, 50);
        assert_eq!(cfg.rimse_grid.lo, -4.65);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn malformed_key_names_the_key() {
        let err = parse_study("reps = 2\nhorizns = 1\n").unwrap_err();
        assert!(err.to_string().contains("horizns"));
        assert_eq!(err.exit_code(), 3);
        let err = parse_study("alpha = lots\n").unwrap_err();
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("grid", "200").unwrap(), (200, None));
        assert_eq!(parse_grid("grid", "5:-1:2").unwrap(), (5, Some((-1.0, 2.0))));
        assert!(parse_grid("grid", "5:2:1").is_err());
        assert!(parse_grid("grid", "1").is_err());
    }
}
