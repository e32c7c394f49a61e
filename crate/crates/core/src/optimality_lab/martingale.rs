use serde::Serialize;

use super::{check_paths, collect_samples, Scenario, TestFunction};
use crate::controlled_sde::{ControlPolicy, StatePath};
use crate::enlargement::InfoDriftField;
use crate::error::{invalid, Result};
use crate::monte_carlo::map_paths;
use crate::paths::{TimeGrid, Window};
use crate::stats::EstimateWithError;

/// Which multiple of the standard error still counts as zero.
pub const MARTINGALE_Z: f64 = 3.0;

/// `N_u(t) = ∫ [2a u − c ∂_u b] ds − ∫ c ∂_u σ dB` on `[t0, T]`, with
/// `c(s) = w_T e^{ρ(T − s)}` the sensitivity of the terminal cost to the
/// state at `s`, together with the discount exponent `b_t = r t`.
#[derive(Debug, Clone)]
pub struct NuPath {
    grid: TimeGrid,
    start_index: usize,
    values: Vec<f64>,
    discount: Vec<f64>,
}

impl NuPath {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `b_t` at each node.
    pub fn discount(&self) -> &[f64] {
        &self.discount
    }

    /// `N(t_{last}) − N(t_{first})` for global control-grid nodes.
    pub fn increment(&self, first: usize, last: usize) -> f64 {
        self.values[last - self.start_index] - self.values[first - self.start_index]
    }
}

pub fn nu_path(scenario: &Scenario, state: &StatePath, field: &InfoDriftField) -> Result<NuPath> {
    let (a, w) = scenario.linear_quadratic_weights()?;
    let p = scenario.params();
    let dynamics = scenario.dynamics();
    let rho = dynamics.state_rate(p);
    let grid = *state.grid();
    let dt = grid.dt();
    let i0 = state.start_index();
    let b = field.path();
    let mut values = Vec::with_capacity(grid.len());
    let mut n = 0.0;
    values.push(n);
    for (k, &u) in state.controls().iter().enumerate() {
        let t = grid.time(k);
        let c = w * (rho * (p.horizon - t)).exp();
        n += (2.0 * a * u - c * dynamics.drift_sensitivity(p, t)) * dt
            - c * dynamics.diffusion_sensitivity(p, t) * b.increment(i0 + k);
        values.push(n);
    }
    let discount = grid.times().iter().map(|t| p.r * t).collect();
    Ok(NuPath {
        grid,
        start_index: i0,
        values,
        discount,
    })
}

/// `E[φ (N(t+h) − N(t))]` for one window and test function.
#[derive(Debug, Clone, Serialize)]
pub struct MartingaleCell {
    pub window: Window,
    pub test_function: String,
    pub estimate: EstimateWithError,
    pub z: f64,
    /// `|mean| <= 3 SE`.
    pub pass: bool,
}

/// Checks `E[φ ΔN] = 0` for every window and every `φ` evaluated at the
/// window start.
pub fn martingale_diagnostic(
    policy: &ControlPolicy,
    scenario: &Scenario,
    test_functions: &[TestFunction],
    windows: &[Window],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<MartingaleCell>> {
    check_paths(n_paths)?;
    if test_functions.is_empty() || windows.is_empty() {
        return Err(invalid("the martingale test needs at least one window and one test function"));
    }
    scenario.linear_quadratic_weights()?;
    let grid = scenario.model().control_grid();
    let i0 = grid.node(scenario.params().t0, "t0")?;
    let ranges = windows
        .iter()
        .map(|w| {
            let r = w.step_range(&grid)?;
            if r.start < i0 {
                return Err(invalid(format!("window ({}, {}] starts before t0", w.start, w.end)));
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;

    let results = map_paths(n_paths, |p| -> Result<Vec<f64>> {
        let field = scenario.field(seed, p)?;
        let state = scenario.simulate(policy, &field)?;
        let nu = nu_path(scenario, &state, &field)?;
        let mut out = Vec::with_capacity(ranges.len() * test_functions.len());
        for r in &ranges {
            let obs = scenario.observe(&field, &state, r.start);
            let dn = nu.increment(r.start, r.end);
            for phi in test_functions {
                out.push(phi.eval(&obs) * dn);
            }
        }
        Ok(out)
    });
    let (samples, _) = collect_samples(results)?;

    let mut cells = Vec::new();
    for (wi, w) in windows.iter().enumerate() {
        for (fi, phi) in test_functions.iter().enumerate() {
            let j = wi * test_functions.len() + fi;
            let xs: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let estimate = EstimateWithError::from_samples(&xs, seed)?;
            let z = estimate.z_score(0.0);
            cells.push(MartingaleCell {
                window: *w,
                test_function: phi.name().to_string(),
                pass: estimate.mean.abs() <= MARTINGALE_Z * estimate.std_error,
                estimate,
                z,
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enlargement::decompose;
    use crate::hjb_insider::example1_policy;
    use crate::params::{CostFunctional, Dynamics, ModelParams};

    #[test]
    fn optimal_nu_is_minus_btilde() {
        // benchmark: 2a u* = α, so N = ∫ α dt − B = −B̃
        let p = ModelParams::benchmark();
        let s = Scenario::new(p.clone(), Dynamics::Wealth, CostFunctional::Terminal, 64).unwrap();
        let field = s.field(2, 0).unwrap();
        let state = s.simulate(&example1_policy(&p), &field).unwrap();
        let nu = nu_path(&s, &state, &field).unwrap();
        let bt = decompose(field.path(), &field).unwrap();
        for (n, b) in nu.values().iter().zip(bt.values()) {
            assert!((n + b).abs() < 1e-12);
        }
        assert!(nu.discount().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn rejects_general_costs_and_empty_inputs() {
        let p = ModelParams::benchmark();
        let s = Scenario::new(p, Dynamics::Wealth, CostFunctional::Terminal, 16).unwrap();
        let w = [Window::new(0.0, 0.5).unwrap()];
        assert!(martingale_diagnostic(&ControlPolicy::zero(), &s, &[], &w, 10, 0).is_err());
        let general = Scenario::new(
            ModelParams::benchmark(),
            Dynamics::Wealth,
            CostFunctional::General {
                running: std::sync::Arc::new(|_, _, u| u * u),
                terminal: std::sync::Arc::new(|_, x| -x),
            },
            16,
        )
        .unwrap();
        let phi = [TestFunction::constant(1.0)];
        assert!(martingale_diagnostic(&ControlPolicy::zero(), &general, &phi, &w, 10, 0).is_err());
    }
}
