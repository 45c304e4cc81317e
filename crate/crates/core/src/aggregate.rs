//! Share-weighted cross-sectional averages of unit-level responses.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::panel::PanelDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResponse {
    /// Period label of each base time `t`.
    pub periods: Vec<i64>,
    /// `Σ_i (K_{i,t−1} / Σ_j K_{j,t−1}) ĝ(Z_{i,t−1})`
    pub response: Vec<f64>,
    /// Centered 2×4 moving average; `None` within two periods of either end.
    pub smoothed: Vec<Option<f64>>,
}

/// Weighted mean of `g` at each period's unit states.
///
/// `states[k]` and `weights[k]` hold the lagged states and weights of the
/// units observed in period `periods[k]`.
pub fn aggregate_response(
    g: impl Fn(f64) -> f64,
    periods: &[i64],
    states: &[Vec<f64>],
    weights: &[Vec<f64>],
) -> Result<AggregateResponse> {
    if states.len() != periods.len() || weights.len() != periods.len() {
        return Err(Error::Config("periods, states and weights differ in length".into()));
    }
    let mut response = Vec::with_capacity(periods.len());
    for ((&t, z), k) in periods.iter().zip(states).zip(weights) {
        if z.len() != k.len() {
            return Err(Error::Config("states and weights differ in length".into()));
        }
        if k.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain(alloc::format!("negative or non-finite weight in period {t}")));
        }
        let total: f64 = k.iter().sum();
        if total == 0.0 {
            return Err(Error::Aggregation { period: t });
        }
        let acc: f64 = z.iter().zip(k).map(|(&zi, &wi)| wi * g(zi)).sum();
        response.push(acc / total);
    }
    let smoothed = centered_ma_2x4(&response);
    Ok(AggregateResponse {
        periods: periods.to_vec(),
        response,
        smoothed,
    })
}

/// Centered moving average over four periods: weights `(1, 2, 2, 2, 1) / 8`.
pub fn centered_ma_2x4(x: &[f64]) -> Vec<Option<f64>> {
    (0..x.len())
        .map(|k| {
            (k >= 2 && k + 2 < x.len()).then(|| {
                (x[k - 2] + 2.0 * (x[k - 1] + x[k] + x[k + 1]) + x[k + 2]) / 8.0
            })
        })
        .collect()
}

/// Aggregates over a panel, using control column `weight_col` as `K`.
///
/// Base times run from the second period, pairing period `t` with the
/// states and weights of `t − 1`.
pub fn aggregate_from_panel(
    g: impl Fn(f64) -> f64,
    panel: &PanelDataset,
    weight_col: usize,
) -> Result<AggregateResponse> {
    if weight_col >= panel.n_controls() {
        return Err(Error::Config(alloc::format!("no control column {weight_col}")));
    }
    let n = panel.n_units();
    let periods: Vec<i64> = panel.time_index[1..].to_vec();
    let mut states = Vec::with_capacity(periods.len());
    let mut weights = Vec::with_capacity(periods.len());
    for t in 1..panel.n_periods() {
        states.push((0..n).map(|i| panel.z(i, t - 1)).collect());
        weights.push((0..n).map(|i| panel.w(i, t - 1)[weight_col]).collect());
    }
    aggregate_response(g, &periods, &states, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_unit_returns_its_response() {
        let g = |z: f64| z * z - 1.0;
        let r = aggregate_response(g, &[1, 2], &[vec![0.5], vec![2.0]], &[vec![3.0], vec![0.1]]).unwrap();
        assert!((r.response[0] - g(0.5)).abs() < 1e-15);
        assert!((r.response[1] - g(2.0)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_units_cancel_for_odd_response() {
        let g = |z: f64| z * z * z;
        let r = aggregate_response(g, &[7], &[vec![1.3, -1.3]], &[vec![1.0, 1.0]]).unwrap();
        assert_eq!(r.response[0], 0.0);
    }

    #[test]
    fn three_unit_weighted_mean() {
        // weights 1, 3, 4 over total 8; g = 2z
        let r = aggregate_response(|z| 2.0 * z, &[0], &[vec![1.0, 2.0, -1.0]], &[vec![1.0, 3.0, 4.0]]).unwrap();
        let expected = (1.0 * 2.0 + 3.0 * 4.0 + 4.0 * -2.0) / 8.0;
        assert!((r.response[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_report_period() {
        let err = aggregate_response(|z| z, &[4, 5], &[vec![1.0], vec![1.0]], &[vec![1.0], vec![0.0]]).unwrap_err();
        assert_eq!(err, Error::Aggregation { period: 5 });
    }

    #[test]
    fn moving_average_of_linear_trend_is_identity() {
        let x: Vec<f64> = (0..8).map(|k| 3.0 + 0.5 * k as f64).collect();
        let ma = centered_ma_2x4(&x);
        assert_eq!(ma[0], None);
        assert_eq!(ma[1], None);
        assert_eq!(ma[6], None);
        for k in 2..6 {
            assert!((ma[k].unwrap() - x[k]).abs() < 1e-14);
        }
    }
}
