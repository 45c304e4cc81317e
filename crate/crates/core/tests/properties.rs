//! Invariants of the sieve basis, the LASSO solver, the simulator and the
//! linear-estimand weights.

mod common;

use common::checks;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use state_lp_core::lp::{fit_linear_lp, Solver};
use state_lp_core::misspec::omega_empirical;
use state_lp_core::monte_carlo::{simulate_dgp, trapezoid, DgpSpec, GFunction};
use state_lp_core::panel::{build_regression_sample, OutcomeMode};
use state_lp_core::inference::linspace;
use state_lp_core::spline::{eval_basis, make_basis};

fn ssr(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let coef = x.clone().svd(true, true).solve(y, 1e-14).unwrap();
    (y - x * coef).norm_squared()
}

fn design(points: &[f64], sample: &[f64], dim: usize) -> DMatrix<f64> {
    let basis = make_basis(sample, dim).unwrap();
    let m = eval_basis(&basis, points).unwrap();
    DMatrix::from_row_slice(points.len(), m.dim, &m.values)
}

proptest! {
    #[test]
    fn basis_is_a_partition_of_unity(
        sample in prop::collection::vec(-10.0f64..10.0, 30..80),
        dim in 4usize..15,
        z in -15.0f64..15.0,
    ) {
        prop_assert!(checks::partition_of_unity(&sample, dim, &[z]) < 1e-10);
        let row = make_basis(&sample, dim).unwrap().eval_row(z);
        prop_assert!(row.iter().all(|&v| v >= -1e-14));
        prop_assert!(row.iter().filter(|&&v| v != 0.0).count() <= 4);
    }

    #[test]
    fn four_functions_span_the_cubics(
        sample in prop::collection::vec(-3.0f64..3.0, 20..40),
        c in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let x = design(&sample, &sample, 4);
        let y = DVector::from_iterator(sample.len(), sample.iter().map(|&z| c[0] + z * (c[1] + z * (c[2] + z * c[3]))));
        prop_assert!(ssr(&x, &y) < 1e-16 * (1.0 + y.norm_squared()) * 1e4);
    }

    #[test]
    fn nested_knots_never_raise_ssr(
        pairs in prop::collection::vec((-4.0f64..4.0, -5.0f64..5.0), 60..120),
    ) {
        // Quantile knots for J = 5 (median) are a subset of those for J = 7 (quartiles).
        let z: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y = DVector::from_iterator(z.len(), pairs.iter().map(|p| p.1));
        let s4 = ssr(&design(&z, &z, 4), &y);
        let s5 = ssr(&design(&z, &z, 5), &y);
        let s7 = ssr(&design(&z, &z, 7), &y);
        let tol = 1e-9 * (1.0 + y.norm_squared());
        prop_assert!(s5 <= s4 + tol);
        prop_assert!(s7 <= s5 + tol);
    }

    #[test]
    fn lasso_solutions_satisfy_kkt(seed in 0u64..500, frac in 0.001f64..1.2) {
        prop_assert!(checks::lasso_kkt(seed, frac) < 1e-6);
    }
}

#[test]
fn simulated_state_variance_is_four() {
    let panel = simulate_dgp(&DgpSpec::default(), 500, 200, 17).unwrap();
    let n = panel.state.len() as f64;
    let mean = panel.state.iter().sum::<f64>() / n;
    let var = panel.state.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
    assert!((var / 4.0 - 1.0).abs() < 0.10, "Var(Z) = {var}");
}

#[test]
fn zero_response_leaves_outcome_unrelated_to_shock() {
    let spec = DgpSpec {
        g: GFunction::Polynomial(vec![0.0]),
        ..DgpSpec::default()
    };
    let panel = simulate_dgp(&spec, 200, 100, 5).unwrap();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..panel.n_units() {
        for t in 0..panel.n_periods() {
            let (x, y) = (panel.x(t), panel.y(i, t));
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
    }
    let corr = sxy / (sxx * syy).sqrt();
    assert!(corr.abs() < 0.02, "corr = {corr}");
}

#[test]
fn linear_slope_is_a_weighted_average_of_derivatives() {
    // β̂ = g(a) ω̂(a) + ∫ ω̂ g′ over the sample support [a, b].
    let spec = DgpSpec::default();
    let panel = simulate_dgp(&spec, 500, 200, 23).unwrap();
    let sample = build_regression_sample(&panel, 0, OutcomeMode::Level, false).unwrap();
    let lin = fit_linear_lp(&sample, Solver::Qr).unwrap();
    let (a, b) = sample.state_range();
    let grid = linspace(a, b, 4001);
    let curve = omega_empirical(&sample.state_at_base, &sample.shock_at_base, &grid).unwrap();
    let integrand: Vec<f64> = grid.iter().zip(&curve.omega).map(|(&z, w)| w * spec.g.derivative(z)).collect();
    let represented = spec.g.eval(a) * curve.omega[0] + trapezoid(&grid, &integrand);
    assert!((lin.beta - represented).abs() < 0.05, "{} vs {}", lin.beta, represented);
}
