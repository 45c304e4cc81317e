//! Balanced micro–macro panels and horizon-aligned regression samples.
//!
//! Storage is unit-major: cell `(i, t)` of an `N×T` array lives at `i * T + t`,
//! with `t` the zero-based position in `time_index`. Controls add a trailing
//! `Q` axis: `(i, t, q)` lives at `(i * T + t) * Q + q`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub unit_ids: Vec<String>,
    /// Consecutive integer period labels.
    pub time_index: Vec<i64>,
    pub outcome: Vec<f64>,
    /// One aggregate shock per period.
    pub shock: Vec<f64>,
    pub state: Vec<f64>,
    pub controls: Vec<f64>,
    pub control_names: Vec<String>,
}

impl PanelDataset {
    /// Validates shapes and finiteness.
    pub fn new(
        unit_ids: Vec<String>,
        time_index: Vec<i64>,
        outcome: Vec<f64>,
        shock: Vec<f64>,
        state: Vec<f64>,
        controls: Vec<f64>,
        control_names: Vec<String>,
    ) -> Result<Self> {
        let n = unit_ids.len();
        let t = time_index.len();
        let q = control_names.len();
        if n == 0 {
            return Err(Error::Design("panel needs at least one unit".into()));
        }
        if t < 2 {
            return Err(Error::Design("panel needs at least two periods".into()));
        }
        if time_index.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Design("time index must be consecutive integers".into()));
        }
        if outcome.len() != n * t || state.len() != n * t || shock.len() != t {
            return Err(Error::Design("panel array shapes do not match N×T".into()));
        }
        if controls.len() != n * t * q {
            return Err(Error::Design("control array shape does not match N×T×Q".into()));
        }
        let all_finite = outcome
            .iter()
            .chain(&state)
            .chain(&shock)
            .chain(&controls)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Design("panel contains non-finite values".into()));
        }
        Ok(Self {
            unit_ids,
            time_index,
            outcome,
            shock,
            state,
            controls,
            control_names,
        })
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn n_periods(&self) -> usize {
        self.time_index.len()
    }

    pub fn n_controls(&self) -> usize {
        self.control_names.len()
    }

    #[inline]
    pub fn y(&self, i: usize, t: usize) -> f64 {
        self.outcome[i * self.n_periods() + t]
    }

    #[inline]
    pub fn z(&self, i: usize, t: usize) -> f64 {
        self.state[i * self.n_periods() + t]
    }

    #[inline]
    pub fn x(&self, t: usize) -> f64 {
        self.shock[t]
    }

    pub fn w(&self, i: usize, t: usize) -> &[f64] {
        let q = self.n_controls();
        let start = (i * self.n_periods() + t) * q;
        &self.controls[start..start + q]
    }

    /// Smallest and largest state value over all cells.
    pub fn state_range(&self) -> (f64, f64) {
        self.state
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)))
    }
}

/// How the left-hand side of the horizon-`h` projection is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutcomeMode {
    /// `Y_{i,t+h}`
    #[default]
    Level,
    /// `Y_{i,t+h} - Y_{i,t}`
    CumulativeFromT,
    /// `Y_{i,t+h} - Y_{i,t-1}`
    CumulativeFromTMinus1,
}

/// Rows of the horizon-`h` local projection.
///
/// Rows are ordered time-major: all units for the first base time, then all
/// units for the next, so per-period groups are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub horizon: usize,
    pub mode: OutcomeMode,
    pub n_units: usize,
    /// Zero-based period position of the first base time `t`.
    pub window_start: usize,
    pub window_len: usize,
    /// `(unit, zero-based base time)` per row.
    pub rows: Vec<(usize, usize)>,
    pub response: Vec<f64>,
    /// `Z_{i,t-1}`
    pub state_at_base: Vec<f64>,
    /// `X_t`
    pub shock_at_base: Vec<f64>,
    /// `W_{i,t-1}`, row-major `n×Q`.
    pub controls_at_base: Vec<f64>,
    pub n_controls: usize,
    /// When present: `X_{t+s}` for `s = 1..=h`, row-major `n×h`.
    pub future_shocks: Option<Vec<f64>>,
    /// When present: `Z_{i,t+s-1}` for `s = 1..=h`, row-major `n×h`.
    pub future_states: Option<Vec<f64>>,
}

impl RegressionSample {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn has_intermediate(&self) -> bool {
        self.future_shocks.is_some()
    }

    /// Row range holding base-time window position `k`.
    pub fn period_rows(&self, k: usize) -> core::ops::Range<usize> {
        k * self.n_units..(k + 1) * self.n_units
    }

    /// Smallest and largest `Z_{i,t-1}` in the sample.
    pub fn state_range(&self) -> (f64, f64) {
        self.state_at_base
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)))
    }
}

/// Builds the stacked sample for horizon `h`.
///
/// Base times run from the second period (so `Z_{i,t-1}` is observed) to
/// `T - h` (so `Y_{i,t+h}` is observed), giving `N·(T-1-h)` rows.
pub fn build_regression_sample(
    panel: &PanelDataset,
    h: usize,
    mode: OutcomeMode,
    with_intermediate: bool,
) -> Result<RegressionSample> {
    let n_periods = panel.n_periods();
    let n_units = panel.n_units();
    let q = panel.n_controls();
    if h + 2 > n_periods {
        return Err(Error::Horizon(format!(
            "horizon {h} needs at least {} periods, panel has {n_periods}",
            h + 2
        )));
    }
    let window_start = 1;
    let window_len = n_periods - 1 - h;
    if window_len == 0 {
        return Err(Error::Horizon("empty base-time window".into()));
    }
    let n = n_units * window_len;
    let mut rows = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    let mut state_at_base = Vec::with_capacity(n);
    let mut shock_at_base = Vec::with_capacity(n);
    let mut controls_at_base = Vec::with_capacity(n * q);
    let intermediate = with_intermediate && h > 0;
    let mut future_shocks = Vec::with_capacity(if intermediate { n * h } else { 0 });
    let mut future_states = Vec::with_capacity(if intermediate { n * h } else { 0 });

    for t in window_start..window_start + window_len {
        for i in 0..n_units {
            rows.push((i, t));
            let lead = panel.y(i, t + h);
            response.push(match mode {
                OutcomeMode::Level => lead,
                OutcomeMode::CumulativeFromT => lead - panel.y(i, t),
                OutcomeMode::CumulativeFromTMinus1 => lead - panel.y(i, t - 1),
            });
            state_at_base.push(panel.z(i, t - 1));
            shock_at_base.push(panel.x(t));
            controls_at_base.extend_from_slice(panel.w(i, t - 1));
            if intermediate {
                for s in 1..=h {
                    future_shocks.push(panel.x(t + s));
                    future_states.push(panel.z(i, t + s - 1));
                }
            }
        }
    }

    Ok(RegressionSample {
        horizon: h,
        mode,
        n_units,
        window_start,
        window_len,
        rows,
        response,
        state_at_base,
        shock_at_base,
        controls_at_base,
        n_controls: q,
        future_shocks: with_intermediate.then_some(future_shocks),
        future_states: with_intermediate.then_some(future_states),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn toy(n: usize, t: usize) -> PanelDataset {
        let ids = (0..n).map(|i| i.to_string()).collect();
        let outcome = (0..n * t).map(|k| k as f64).collect();
        let state = (0..n * t).map(|k| 0.5 * k as f64).collect();
        let shock = (0..t).map(|k| 10.0 + k as f64).collect();
        let controls = (0..n * t).map(|k| -(k as f64)).collect();
        PanelDataset::new(
            ids,
            (1..=t as i64).collect(),
            outcome,
            shock,
            state,
            controls,
            vec!["w1".to_string()],
        )
        .unwrap()
    }

    #[test]
    fn level_window_for_t5_h2() {
        let p = toy(3, 5);
        let s = build_regression_sample(&p, 2, OutcomeMode::Level, false).unwrap();
        let base: Vec<i64> = s.rows.iter().map(|&(_, t)| p.time_index[t]).collect();
        assert_eq!(base, vec![2, 2, 2, 3, 3, 3]);
        assert_eq!(s.n(), 6);
        // row (unit 1, t=2): Y_{1,4}, Z_{1,1}, X_2, W_{1,1}
        assert_eq!(s.response[1], p.y(1, 3));
        assert_eq!(s.state_at_base[1], p.z(1, 0));
        assert_eq!(s.shock_at_base[1], p.x(1));
        assert_eq!(s.controls_at_base[1], p.w(1, 0)[0]);
    }

    #[test]
    fn cumulative_h0_is_zero() {
        let p = toy(2, 5);
        let s = build_regression_sample(&p, 0, OutcomeMode::CumulativeFromT, false).unwrap();
        assert!(s.response.iter().all(|&v| v == 0.0));
        assert_eq!(s.n(), 8);
    }

    #[test]
    fn cumulative_from_t_minus_1() {
        let p = toy(1, 6);
        let s =
            build_regression_sample(&p, 1, OutcomeMode::CumulativeFromTMinus1, false).unwrap();
        assert_eq!(s.response[0], p.y(0, 2) - p.y(0, 0));
    }

    #[test]
    fn horizon_too_large() {
        let p = toy(2, 5);
        assert!(build_regression_sample(&p, 3, OutcomeMode::Level, false).is_ok());
        assert!(matches!(
            build_regression_sample(&p, 4, OutcomeMode::Level, false),
            Err(Error::Horizon(_))
        ));
    }

    #[test]
    fn intermediate_pairs() {
        let p = toy(2, 8);
        let s = build_regression_sample(&p, 3, OutcomeMode::Level, true).unwrap();
        let fx = s.future_shocks.as_ref().unwrap();
        let fz = s.future_states.as_ref().unwrap();
        assert_eq!(fx.len(), s.n() * 3);
        let (i, t) = s.rows[3];
        for step in 1..=3 {
            assert_eq!(fx[3 * 3 + step - 1], p.x(t + step));
            assert_eq!(fz[3 * 3 + step - 1], p.z(i, t + step - 1));
        }
    }

    #[test]
    fn h0_with_flag_has_no_pairs() {
        let p = toy(2, 5);
        let s = build_regression_sample(&p, 0, OutcomeMode::Level, true).unwrap();
        assert!(s.future_shocks.as_ref().unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_shapes() {
        let err = PanelDataset::new(
            vec!["a".into()],
            vec![1],
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![],
            vec![],
        );
        assert!(err.is_err());
    }
}
