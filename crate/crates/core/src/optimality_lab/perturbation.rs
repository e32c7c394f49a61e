use std::ops::Range;
use std::sync::Arc;

use serde::Serialize;

use super::{check_paths, collect_samples, Scenario, TestFunction};
use crate::controlled_sde::{wealth_step_closed_form, ControlPolicy, Observation, StatePath};
use crate::enlargement::InfoDriftField;
use crate::error::{invalid, Result};
use crate::monte_carlo::map_paths;
use crate::params::Dynamics;
use crate::paths::Window;
use crate::stats::EstimateWithError;

pub const DEFAULT_THETA_BOUND: f64 = 10.0;

/// `y = −0.5, −0.4, …, 0.5`.
pub fn default_amplitudes() -> Vec<f64> {
    (-5..=5).map(|k| k as f64 / 10.0).collect()
}

/// The perturbation `u + y θ₀ χ_{(t, t+h]}`, with `θ₀` read at the start
/// of the window and clipped to `[−bound, bound]`.
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    pub window: Window,
    pub theta0: TestFunction,
    pub bound: f64,
    pub amplitudes: Vec<f64>,
}

impl PerturbationSpec {
    pub fn new(window: Window, theta0: TestFunction) -> Self {
        Self {
            window,
            theta0,
            bound: DEFAULT_THETA_BOUND,
            amplitudes: default_amplitudes(),
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    pub fn with_amplitudes(mut self, amplitudes: Vec<f64>) -> Self {
        self.amplitudes = amplitudes;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(invalid(format!("theta0 must be bounded: got bound {}", self.bound)));
        }
        if let Some(y) = self.amplitudes.iter().find(|y| !y.is_finite()) {
            return Err(invalid(format!("amplitude {y} is not finite")));
        }
        Ok(())
    }

    /// `θ₀` at the window start.
    pub fn theta(&self, obs: &Observation<'_>) -> Result<f64> {
        let v = self.theta0.eval(obs);
        if !v.is_finite() {
            return Err(invalid(format!("theta0 {} is not finite: {v}", self.theta0.name())));
        }
        Ok(v.clamp(-self.bound, self.bound))
    }
}

/// Steps of `window` on the control grid; it must lie inside `[t0, T]`.
fn window_steps(scenario: &Scenario, window: Window) -> Result<Range<usize>> {
    let p = scenario.params();
    let grid = scenario.model().control_grid();
    let steps = window.step_range(&grid)?;
    let i0 = grid.node(p.t0, "t0")?;
    if steps.start < i0 {
        return Err(invalid(format!(
            "window ({}, {}] starts before t0 = {}",
            window.start, window.end, p.t0
        )));
    }
    Ok(steps)
}

/// `X_T(θ; 0)`: the terminal state driven by `θ χ_window` from zero.
pub fn state_sensitivity(scenario: &Scenario, field: &InfoDriftField, window: Window, theta: f64) -> Result<f64> {
    let p = scenario.params();
    match scenario.dynamics() {
        Dynamics::Wealth => wealth_step_closed_form(p, theta, window, field.path()),
        dynamics => {
            let grid = field.control_grid();
            let steps = window.step_range(&grid)?;
            let (dt, rho) = (grid.dt(), dynamics.state_rate(p));
            let b = field.path();
            let mut acc = 0.0;
            for i in steps {
                let t = grid.time(i);
                let du = dynamics.drift_sensitivity(p, t) * dt + dynamics.diffusion_sensitivity(p, t) * b.increment(i);
                acc += (rho * (p.horizon - t)).exp() * theta * du;
            }
            Ok(acc)
        }
    }
}

/// Replays the realized controls of `base`, shifted by `shift` on `steps`.
fn replay(base: &StatePath, steps: Range<usize>, shift: f64) -> ControlPolicy {
    let controls: Arc<[f64]> = base.controls().into();
    let i0 = base.start_index();
    ControlPolicy::new(format!("replay+{shift}χ"), move |obs| {
        let u = controls[obs.index - i0];
        if steps.contains(&obs.index) {
            u + shift
        } else {
            u
        }
    })
}

/// One path of `F'(y)`: `Σ_window 2a(u + yθ)θ dt − w_T X_T(θ; 0)`.
fn derivative_sample(base: &StatePath, steps: &Range<usize>, a: f64, w: f64, theta: f64, y: f64, xs: f64) -> f64 {
    let dt = base.grid().dt();
    let u = base.controls();
    let i0 = base.start_index();
    let mut running = 0.0;
    for i in steps.clone() {
        running += 2.0 * a * (u[i - i0] + y * theta) * theta * dt;
    }
    running - w * xs
}

/// `F'(y) = E[∫ 2a(u + yθ)θ ds] − E[w_T X_T(θ; 0)]` for `L = a u²` and a
/// linear terminal cost with weight `w_T`.
pub fn directional_derivative(
    policy: &ControlPolicy,
    scenario: &Scenario,
    spec: &PerturbationSpec,
    y: f64,
    n_paths: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    check_paths(n_paths)?;
    spec.validate()?;
    if !y.is_finite() {
        return Err(invalid(format!("amplitude {y} is not finite")));
    }
    let (a, w) = scenario.linear_quadratic_weights()?;
    let steps = window_steps(scenario, spec.window)?;
    let results = map_paths(n_paths, |p| {
        let field = scenario.field(seed, p)?;
        let base = scenario.simulate(policy, &field)?;
        let theta = spec.theta(&scenario.observe(&field, &base, steps.start))?;
        let xs = state_sensitivity(scenario, &field, spec.window, theta)?;
        Ok(derivative_sample(&base, &steps, a, w, theta, y, xs))
    });
    let (samples, _) = collect_samples(results)?;
    EstimateWithError::from_samples(&samples, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub y: f64,
    pub cost: EstimateWithError,
    /// `F'(y)`, when the cost is linear-quadratic.
    pub derivative: Option<EstimateWithError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub policy: String,
    pub theta0: String,
    pub window: Window,
    pub rows: Vec<SweepRow>,
    /// Amplitude of the smallest estimated cost, ties broken toward 0.
    pub argmin: f64,
    pub diverged: Vec<usize>,
    pub seed: u64,
}

/// `F(y) = Ĵ(u + yθ₀χ)` for every amplitude of `spec`, all on the same
/// sampled paths.
pub fn perturbation_sweep(
    policy: &ControlPolicy,
    scenario: &Scenario,
    spec: &PerturbationSpec,
    n_paths: usize,
    seed: u64,
) -> Result<SweepTable> {
    check_paths(n_paths)?;
    spec.validate()?;
    if spec.amplitudes.is_empty() {
        return Err(invalid("no perturbation amplitudes given"));
    }
    let steps = window_steps(scenario, spec.window)?;
    let lq = scenario.linear_quadratic_weights().ok();
    let results = map_paths(n_paths, |p| -> Result<Vec<(f64, f64)>> {
        let field = scenario.field(seed, p)?;
        let base = scenario.simulate(policy, &field)?;
        let theta = spec.theta(&scenario.observe(&field, &base, steps.start))?;
        let xs = match lq {
            Some(_) => state_sensitivity(scenario, &field, spec.window, theta)?,
            None => 0.0,
        };
        spec.amplitudes
            .iter()
            .map(|&y| {
                let path = scenario.simulate(&replay(&base, steps.clone(), y * theta), &field)?;
                let d = lq.map_or(f64::NAN, |(a, w)| derivative_sample(&base, &steps, a, w, theta, y, xs));
                Ok((scenario.path_cost(&path), d))
            })
            .collect()
    });
    let (samples, diverged) = collect_samples(results)?;

    let mut rows = Vec::with_capacity(spec.amplitudes.len());
    for (j, &y) in spec.amplitudes.iter().enumerate() {
        let costs: Vec<f64> = samples.iter().map(|s| s[j].0).collect();
        let derivative = match lq {
            Some(_) => {
                let ds: Vec<f64> = samples.iter().map(|s| s[j].1).collect();
                Some(EstimateWithError::from_samples(&ds, seed)?)
            }
            None => None,
        };
        rows.push(SweepRow {
            y,
            cost: EstimateWithError::from_samples(&costs, seed)?,
            derivative,
        });
    }
    let argmin = rows
        .iter()
        .min_by(|a, b| {
            a.cost
                .mean
                .total_cmp(&b.cost.mean)
                .then(a.y.abs().total_cmp(&b.y.abs()))
        })
        .map(|r| r.y)
        .unwrap_or(0.0);
    Ok(SweepTable {
        policy: policy.name().to_string(),
        theta0: spec.theta0.name().to_string(),
        window: spec.window,
        rows,
        argmin,
        diverged,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb_insider::example1_policy;
    use crate::optimality_lab::cost_mc;
    use crate::params::{CostFunctional, ModelParams};

    fn scenario(n: usize) -> Scenario {
        Scenario::new(ModelParams::benchmark(), Dynamics::Wealth, CostFunctional::Terminal, n).unwrap()
    }

    #[test]
    fn sweep_matches_separate_runs() {
        let s = scenario(32);
        let pol = example1_policy(s.params());
        let spec = PerturbationSpec::new(Window::new(0.25, 0.5).unwrap(), TestFunction::constant(1.0))
            .with_amplitudes(vec![-0.2, 0.0, 0.3]);
        let table = perturbation_sweep(&pol, &s, &spec, 40, 9).unwrap();
        let steps = spec.window.step_range(&s.model().control_grid()).unwrap();
        for row in &table.rows {
            let shifted = pol.shifted(steps.clone(), row.y);
            let direct = cost_mc(&shifted, &s, 40, 9).unwrap().estimate.mean;
            assert!((direct - row.cost.mean).abs() < 1e-12, "{direct} vs {}", row.cost.mean);
        }
    }

    #[test]
    fn derivative_is_linear_in_y() {
        let s = scenario(32);
        let pol = ControlPolicy::zero();
        let spec = PerturbationSpec::new(Window::new(0.0, 0.5).unwrap(), TestFunction::constant(1.0));
        let table = perturbation_sweep(&pol, &s, &spec, 20, 1).unwrap();
        // u = 0, θ = 1: F'(y) = 2y h − ΔB, F(y) = y² h − y ΔB
        for row in &table.rows {
            let d = row.derivative.as_ref().unwrap();
            let d0 = directional_derivative(&pol, &s, &spec, row.y, 20, 1).unwrap();
            assert!((d.mean - d0.mean).abs() < 1e-12);
        }
        let f = |y: f64| table.rows.iter().find(|r| r.y == y).unwrap().cost.mean;
        let d = |y: f64| table.rows.iter().find(|r| r.y == y).unwrap().derivative.as_ref().unwrap().mean;
        // F(y) − F(−y) = −2y E[ΔB] and F'(y) − F'(−y) = 4 y h
        assert!((d(0.3) - d(-0.3) - 1.2 * 0.5).abs() < 1e-12);
        assert!((f(0.3) + f(-0.3) - 2.0 * 0.09 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn argmin_ties_toward_zero() {
        let s = scenario(16);
        let spec = PerturbationSpec::new(Window::new(0.0, 0.5).unwrap(), TestFunction::constant(0.0))
            .with_amplitudes(vec![-0.2, -0.1, 0.1, 0.0, 0.2]);
        let t = perturbation_sweep(&ControlPolicy::zero(), &s, &spec, 10, 0).unwrap();
        assert_eq!(t.argmin, 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let s = scenario(16);
        let pol = ControlPolicy::zero();
        let w = Window::new(0.0, 0.5).unwrap();
        let unbounded = PerturbationSpec::new(w, TestFunction::info(1.0)).with_bound(f64::INFINITY);
        assert!(perturbation_sweep(&pol, &s, &unbounded, 10, 0).is_err());
        let nan = PerturbationSpec::new(w, TestFunction::new("nan", |_| f64::NAN));
        assert!(directional_derivative(&pol, &s, &nan, 0.0, 10, 0).is_err());
        let outside = PerturbationSpec::new(Window::new(0.5, 1.5).unwrap(), TestFunction::constant(1.0));
        assert!(perturbation_sweep(&pol, &s, &outside, 10, 0).is_err());
        let empty = PerturbationSpec::new(w, TestFunction::constant(1.0)).with_amplitudes(vec![]);
        assert!(perturbation_sweep(&pol, &s, &empty, 10, 0).is_err());
    }

    #[test]
    fn closed_form_sensitivity_for_unit_drift() {
        let s = Scenario::new(ModelParams::benchmark(), Dynamics::UnitDrift, CostFunctional::Terminal, 20).unwrap();
        let field = s.field(4, 0).unwrap();
        let w = Window::new(0.25, 0.75).unwrap();
        let xs = state_sensitivity(&s, &field, w, 2.0).unwrap();
        let b = field.path();
        let expect = 2.0 * (0.5 + b.at(15) - b.at(5));
        assert!((xs - expect).abs() < 1e-12);
    }
}
