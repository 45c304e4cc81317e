//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use state_lp_core::monte_carlo::{DgpSpec, GFunction};
use state_lp_core::selection::Selector;

use crate::commands::{
    cmd_aggregate, cmd_diagnose_linear, cmd_estimate, cmd_simulate, cmd_simulate_panel, AggregateArgs,
    DiagnoseArgs, DiagnoseSource, EstimateArgs, SimulateArgs, SimulatePanelArgs,
};
use crate::config::{
    parse_f64_list, parse_grid, parse_mode, parse_selector, parse_solver, parse_study, parse_switch,
    parse_usize_list, SelectorArgs,
};
use crate::error::{CliError, CliResult};
use crate::panel_io::PanelSchema;

#[derive(Debug, Parser)]
#[command(name = "state-lp", version, about = "State-dependent impulse responses by sieve local projections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate response curves with pointwise and uniform bands from a panel CSV.
    Estimate(EstimateCmd),
    /// Run a Monte Carlo study described by a key-value config file.
    Simulate(SimulateCmd),
    /// Write one simulated panel as CSV.
    SimulatePanel(SimulatePanelCmd),
    /// Weight function behind the linear interaction estimand.
    DiagnoseLinear(DiagnoseCmd),
    /// Share-weighted aggregate of unit-level responses.
    Aggregate(AggregateCmd),
}

#[derive(Debug, Args)]
pub struct ColumnArgs {
    #[arg(long, default_value = "unit")]
    pub unit_col: String,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "y")]
    pub outcome_col: String,
    #[arg(long, default_value = "x")]
    pub shock_col: String,
    #[arg(long, default_value = "z")]
    pub state_col: String,
    /// Comma list of control columns; defaults to every remaining column.
    #[arg(long)]
    pub controls: Option<String>,
}

impl ColumnArgs {
    fn schema(&self) -> PanelSchema {
        PanelSchema {
            unit: self.unit_col.clone(),
            time: self.time_col.clone(),
            outcome: self.outcome_col.clone(),
            shock: self.shock_col.clone(),
            state: self.state_col.clone(),
            controls: self
                .controls
                .as_ref()
                .map(|s| s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect()),
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectorCmd {
    /// aic, gcv, lasso or oracle.
    #[arg(long, default_value = "aic")]
    pub selector: String,
    /// Fixed sieve dimension for `--selector oracle`.
    #[arg(long)]
    pub oracle_j: Option<usize>,
    /// AIC/GCV candidate dimensions, e.g. `4..20` or `4,6,8`.
    #[arg(long, default_value = "4..20")]
    pub candidates: String,
    #[arg(long, default_value_t = 50)]
    pub lasso_max_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub lasso_folds: usize,
}

impl SelectorCmd {
    fn selector(&self) -> CliResult<Selector> {
        let mut args = SelectorArgs {
            oracle_j: self.oracle_j,
            candidates: parse_usize_list("--candidates", &self.candidates)?,
            ..SelectorArgs::default()
        };
        args.lasso.max_dim = self.lasso_max_dim;
        args.lasso.folds = self.lasso_folds;
        parse_selector("--selector", &self.selector, &args)
    }
}

#[derive(Debug, Args)]
pub struct EstimateCmd {
    #[arg(long)]
    pub panel: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// Horizons, e.g. `0..12` or `0,4,8`.
    #[arg(long, default_value = "0")]
    pub horizons: String,
    #[command(flatten)]
    pub selector: SelectorCmd,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Multiplier-bootstrap draws.
    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,
    /// `n` points over the sample state range, or `n:lo:hi`.
    #[arg(long, default_value = "200")]
    pub grid: String,
    /// level, cum-t or cum-t1.
    #[arg(long, default_value = "level")]
    pub mode: String,
    /// Include intermediate shock terms: on or off.
    #[arg(long, default_value = "on")]
    pub intermediate: String,
    /// Shock size.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Bartlett lag; defaults to floor(4 (n/100)^(2/9)).
    #[arg(long)]
    pub hac_lag: Option<usize>,
    /// qr or gram.
    #[arg(long, default_value = "qr")]
    pub solver: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "STATE_LP_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// Study config file (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Extra `key=value` settings applied after the file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizons: Option<String>,
    /// Comma list of selectors.
    #[arg(long)]
    pub selector: Option<String>,
    #[arg(long)]
    pub oracle_j: Option<usize>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// RIMSE grid, `n` or `n:lo:hi`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub intermediate: Option<String>,
    #[arg(long, env = "STATE_LP_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulatePanelCmd {
    #[arg(long, default_value_t = 500)]
    pub n_units: usize,
    #[arg(long, default_value_t = 200)]
    pub n_periods: usize,
    /// cubic or fourier.
    #[arg(long, default_value = "cubic")]
    pub g: String,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseCmd {
    /// Use the closed-form worked example on [1, 3].
    #[arg(long, conflicts_with = "panel")]
    pub analytic_example: bool,
    #[arg(long, required_unless_present = "analytic_example")]
    pub panel: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[arg(long, default_value_t = 0)]
    pub horizon: usize,
    #[arg(long, default_value = "level")]
    pub mode: String,
    /// Coefficients c0,c1,... of g'(z) = c0 + c1 z + ...
    #[arg(long)]
    pub gprime_poly: Option<String>,
    /// `n` points, or `n:lo:hi` for panel input.
    #[arg(long, default_value = "2001")]
    pub grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateCmd {
    #[arg(long)]
    pub panel: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// Extra panel column holding the weights.
    #[arg(long)]
    pub weights: String,
    #[arg(long, default_value_t = 0)]
    pub horizon: usize,
    #[command(flatten)]
    pub selector: SelectorCmd,
    #[arg(long, default_value = "level")]
    pub mode: String,
    #[arg(long, default_value = "on")]
    pub intermediate: String,
    #[arg(long, default_value = "qr")]
    pub solver: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn estimate_args(c: &EstimateCmd) -> CliResult<EstimateArgs> {
    Ok(EstimateArgs {
        panel: c.panel.clone(),
        schema: c.columns.schema(),
        horizons: parse_usize_list("--horizons", &c.horizons)?,
        selector: c.selector.selector()?,
        alpha: c.alpha,
        draws: c.bootstrap,
        grid: parse_grid("--grid", &c.grid)?,
        mode: parse_mode("--mode", &c.mode)?,
        intermediate: parse_switch("--intermediate", &c.intermediate)?,
        delta: c.delta,
        hac_lag: c.hac_lag,
        solver: parse_solver("--solver", &c.solver)?,
        seed: c.seed,
        threads: c.threads,
        out: c.out.clone(),
    })
}

/// Flags are appended to the file as `key = value` lines, so they win.
fn simulate_args(c: &SimulateCmd) -> CliResult<SimulateArgs> {
    let mut text = std::fs::read_to_string(&c.config).map_err(|e| CliError::read(&c.config, e))?;
    text.push('\n');
    let mut push = |k: &str, v: String| text.push_str(&format!("{k} = {v}\n"));
    if let Some(v) = c.oracle_j {
        push("oracle_j", v.to_string());
    }
    if let Some(v) = c.reps {
        push("reps", v.to_string());
    }
    if let Some(v) = c.seed {
        push("seed", v.to_string());
    }
    if let Some(v) = &c.horizons {
        push("horizons", v.clone());
    }
    if let Some(v) = &c.selector {
        push("selectors", v.clone());
    }
    if let Some(v) = c.bootstrap {
        push("bootstrap", v.to_string());
    }
    if let Some(v) = c.alpha {
        push("alpha", v.to_string());
    }
    if let Some(v) = &c.grid {
        push("rimse_grid", v.clone());
    }
    if let Some(v) = &c.intermediate {
        push("intermediate", v.clone());
    }
    for kv in &c.set {
        if !kv.contains('=') {
            return Err(CliError::Config(format!("--set `{kv}` is not key=value")));
        }
        text.push_str(kv);
        text.push('\n');
    }
    Ok(SimulateArgs {
        config_path: c.config.clone(),
        config: parse_study(&text)?,
        threads: c.threads,
        out: c.out.clone(),
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Estimate(c) => {
            let args = estimate_args(&c)?;
            let paths = cmd_estimate(&args)?;
            println!("wrote {} files to {}", paths.len(), args.out.display());
        }
        Command::Simulate(c) => {
            let args = simulate_args(&c)?;
            let (result, _) = cmd_simulate(&args)?;
            println!(
                "{} replications ({} failed); tables in {}",
                args.config.reps,
                result.failures,
                args.out.display()
            );
        }
        Command::SimulatePanel(c) => {
            let g = match c.g.as_str() {
                "cubic" => GFunction::Cubic,
                "fourier" => GFunction::Fourier,
                other => return Err(CliError::Config(format!("--g: `{other}` is not cubic or fourier"))),
            };
            let args = SimulatePanelArgs {
                dgp: DgpSpec {
                    g,
                    burn_in: c.burn_in,
                    ..DgpSpec::default()
                },
                n_units: c.n_units,
                n_periods: c.n_periods,
                seed: c.seed,
                out: c.out.clone(),
            };
            let path = cmd_simulate_panel(&args)?;
            println!("wrote {}", path.display());
        }
        Command::DiagnoseLinear(c) => {
            let source = if c.analytic_example {
                DiagnoseSource::AnalyticExample
            } else {
                DiagnoseSource::Panel {
                    path: c.panel.clone().expect("clap enforces --panel"),
                    schema: c.columns.schema(),
                    horizon: c.horizon,
                    mode: parse_mode("--mode", &c.mode)?,
                    gprime_poly: c
                        .gprime_poly
                        .as_deref()
                        .map(|s| parse_f64_list("--gprime-poly", s))
                        .transpose()?,
                }
            };
            let args = DiagnoseArgs {
                source,
                grid: parse_grid("--grid", &c.grid)?,
                out: c.out.clone(),
            };
            let (report, _) = cmd_diagnose_linear(&args)?;
            if let Some(b) = report.beta {
                println!("beta = {b}");
            }
            if let Some(b) = report.beta_hat {
                println!("beta_hat = {b}");
            }
            println!("omega_integral = {}", report.omega_integral);
        }
        Command::Aggregate(c) => {
            let args = AggregateArgs {
                panel: c.panel.clone(),
                schema: c.columns.schema(),
                weights: c.weights.clone(),
                horizon: c.horizon,
                selector: c.selector.selector()?,
                mode: parse_mode("--mode", &c.mode)?,
                intermediate: parse_switch("--intermediate", &c.intermediate)?,
                solver: parse_solver("--solver", &c.solver)?,
                out: c.out.clone(),
            };
            let paths = cmd_aggregate(&args)?;
            println!("wrote {} files to {}", paths.len(), args.out.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
