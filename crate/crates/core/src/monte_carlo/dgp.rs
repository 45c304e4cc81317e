//! Simulation designs and their true impulse responses.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::panel::PanelDataset;
use crate::rng::stream_rng;

/// `0.5 z + 0.3 z² − 0.25 z³`
pub fn g_cubic(z: f64) -> f64 {
    z * (0.5 + z * (0.3 - 0.25 * z))
}

/// Maps the simulated state range `[-4.65, 4.65]` onto one Fourier period.
pub fn fourier_argument(z: f64) -> f64 {
    (z + 4.65) / 9.3
}

/// `0.8 sin(2πu) + 2 cos(2πu) − 0.5 sin(4πu) + cos(4πu)` at `u = (z + 4.65) / 9.3`.
pub fn g_fourier(z: f64) -> f64 {
    let a = 2.0 * PI * fourier_argument(z);
    0.8 * libm::sin(a) + 2.0 * libm::cos(a) - 0.5 * libm::sin(2.0 * a) + libm::cos(2.0 * a)
}

/// State-dependence function of a simulation design.
#[derive(Debug, Clone, PartialEq)]
pub enum GFunction {
    Cubic,
    Fourier,
    /// `Σ_k c_k z^k`
    Polynomial(Vec<f64>),
}

impl GFunction {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            GFunction::Cubic => g_cubic(z),
            GFunction::Fourier => g_fourier(z),
            GFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * z + ck),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            GFunction::Cubic => 0.5 + 0.6 * z - 0.75 * z * z,
            GFunction::Fourier => {
                let a = 2.0 * PI * fourier_argument(z);
                let da = 2.0 * PI / 9.3;
                da * (0.8 * libm::cos(a) - 2.0 * libm::sin(a) - libm::cos(2.0 * a)
                    - 2.0 * libm::sin(2.0 * a))
            }
            GFunction::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * z + k as f64 * ck),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpKind {
    /// `Y_it = g(Z_{i,t−1}) X_t + ρ Y_{i,t−1} + ε_it`
    Dgp1,
    /// Shock-dependent propagation `ρ_t = 0.5 + 0.3 tanh(X_{t−1})`.
    Dgp2,
    /// Response nonlinear in the shock: `g(Z_{i,t−1}) X_t + 0.3 X_t²`.
    Dgp3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub g: GFunction,
    pub rho: f64,
    /// Variance of the unit effect `μ_i`.
    pub mu_var: f64,
    pub xi_ar: f64,
    pub xi_innov_sd: f64,
    pub burn_in: usize,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            kind: DgpKind::Dgp1,
            g: GFunction::Cubic,
            rho: 0.8,
            mu_var: 3.0,
            xi_ar: 0.8,
            xi_innov_sd: libm::sqrt(1.0 - 0.8 * 0.8),
            burn_in: 500,
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) || !(self.xi_ar.abs() < 1.0) {
            return Err(Error::Config("persistence parameters must lie in (-1, 1)".into()));
        }
        if !(self.mu_var >= 0.0) || !(self.xi_innov_sd >= 0.0) {
            return Err(Error::Config("variances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Simulates `burn_in + T` periods and keeps the last `T`.
///
/// The control column `w1` holds `Y_it` itself, so the regression sample
/// picks up the lagged outcome `Y_{i,t−1}` as its control.
pub fn simulate_dgp(spec: &DgpSpec, n_units: usize, n_periods: usize, seed: u64) -> Result<PanelDataset> {
    spec.validate()?;
    if n_units == 0 || n_periods == 0 {
        return Err(Error::Config("simulation needs N >= 1 and T >= 1".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let total = spec.burn_in + n_periods;
    let shock_before = normal();
    let shocks: Vec<f64> = (0..total).map(|_| normal()).collect();
    let mu_sd = libm::sqrt(spec.mu_var);
    let mu: Vec<f64> = (0..n_units).map(|_| mu_sd * normal()).collect();
    let xi_sd = spec.xi_innov_sd / libm::sqrt(1.0 - spec.xi_ar * spec.xi_ar);

    let cells = n_units * n_periods;
    let mut outcome = vec![0.0; cells];
    let mut state = vec![0.0; cells];
    for (i, &mu_i) in mu.iter().enumerate() {
        let mut xi = xi_sd * normal();
        let mut z_prev = mu_i + xi;
        let mut y_prev = 0.0;
        for tau in 0..total {
            let x = shocks[tau];
            let eps = normal();
            let v = normal();
            let x_prev = if tau == 0 { shock_before } else { shocks[tau - 1] };
            let (impact, rho) = match spec.kind {
                DgpKind::Dgp1 => (spec.g.eval(z_prev) * x, spec.rho),
                DgpKind::Dgp2 => (spec.g.eval(z_prev) * x, 0.5 + 0.3 * libm::tanh(x_prev)),
                DgpKind::Dgp3 => (spec.g.eval(z_prev) * x + 0.3 * x * x, spec.rho),
            };
            let y = impact + rho * y_prev + eps;
            xi = spec.xi_ar * xi + spec.xi_innov_sd * v;
            let z = mu_i + xi;
            if tau >= spec.burn_in {
                let t = tau - spec.burn_in;
                outcome[i * n_periods + t] = y;
                state[i * n_periods + t] = z;
            }
            y_prev = y;
            z_prev = z;
        }
    }
    PanelDataset::new(
        (1..=n_units).map(|i| i.to_string()).collect(),
        (1..=n_periods as i64).collect(),
        outcome.clone(),
        shocks[spec.burn_in..].to_vec(),
        state,
        outcome,
        vec!["w1".to_string()],
    )
}

/// `ρ^h g(z) δ`
pub fn true_irf(g: &GFunction, h: usize, delta: f64, z: f64, rho: f64) -> f64 {
    libm::pow(rho, h as f64) * g.eval(z) * delta
}

pub(crate) fn require_dgp1(spec: &DgpSpec) -> Result<()> {
    if spec.kind != DgpKind::Dgp1 {
        return Err(Error::Config(format!(
            "{:?} has no closed-form impulse response; metrics need Dgp1",
            spec.kind
        )));
    }
    Ok(())
}
