use insider_core::controlled_sde::ControlPolicy;
use insider_core::hjb_insider::example1_policy;
use insider_core::optimality_lab::{directional_derivative, perturbation_sweep, PerturbationSpec, Scenario, SweepTable, TestFunction};
use insider_core::params::{CostFunctional, Dynamics};
use insider_core::stats::pooled_se;
use serde_json::Map;

use super::{put, Check, Report, RunError};
use crate::config::ExperimentConfig;
use crate::output::{Cell, Table};

fn push_sweep(table: &mut Table, sweep: &SweepTable) {
    for row in &sweep.rows {
        let (d, dse) = row
            .derivative
            .map_or((f64::NAN, f64::NAN), |d| (d.mean, d.std_error));
        table.push(vec![
            sweep.policy.as_str().into(),
            sweep.theta0.as_str().into(),
            row.y.into(),
            row.cost.mean.into(),
            row.cost.std_error.into(),
            Cell::Float(d),
            Cell::Float(dse),
        ]);
    }
}

fn function(name: &str, bound: f64) -> Result<TestFunction, RunError> {
    TestFunction::by_name(name, bound).ok_or_else(|| RunError::Invalid(format!("unknown function \"{name}\"")))
}

pub fn run(config: &ExperimentConfig) -> Result<Report, RunError> {
    let params = config.model.to_params();
    let scenario = Scenario::new(params.clone(), Dynamics::Wealth, CostFunctional::Terminal, config.n_steps())?;
    let (n_paths, seed) = (config.n_paths(), config.seed());
    let bound = config.theta_bound.unwrap_or(10.0);
    let window = config.window.ok_or_else(|| RunError::Invalid("window is not set".into()))?;
    let theta0 = function(config.theta0.as_deref().unwrap_or("1"), bound)?;
    let spec = PerturbationSpec::new(window, theta0)
        .with_bound(bound)
        .with_amplitudes(config.amplitudes.clone().unwrap_or_default());
    let star = example1_policy(&params);

    let mut checks = Vec::new();
    let mut results = Map::new();
    let mut table = Table::new(config.kind.csv_columns());

    // the optimal policy: minimum at y = 0 with a visible margin
    let sweep = perturbation_sweep(&star, &scenario, &spec, n_paths, seed)?;
    push_sweep(&mut table, &sweep);
    checks.push(Check::equal("optimal_argmin", sweep.argmin, 0.0));
    let at = |s: &SweepTable, y: f64| s.rows.iter().find(|r| r.y == y).map(|r| r.cost);
    let f0 = at(&sweep, 0.0).ok_or_else(|| RunError::Invalid("amplitude grid has no 0".into()))?;
    let lo = sweep.rows.iter().map(|r| r.y).fold(0.0, f64::min);
    let hi = sweep.rows.iter().map(|r| r.y).fold(0.0, f64::max);
    for y in [lo, hi] {
        if y == 0.0 {
            continue;
        }
        let fy = at(&sweep, y).expect("amplitude from the grid");
        let pooled = pooled_se(&fy, &f0);
        checks.push(Check::greater(format!("optimal_margin_at_y={y}"), fy.mean - f0.mean, 3.0 * pooled));
    }
    let d0 = directional_derivative(&star, &scenario, &spec, 0.0, n_paths, seed)?;
    checks.push(Check::within_se("optimal_derivative_at_0", d0.mean, 0.0, d0.std_error, 3.0));
    put(&mut results, "optimal_argmin", sweep.argmin);
    put(&mut results, "optimal_derivative_at_0", d0);

    // u* + s χ: the derivative points back toward u*
    let shift = config.suboptimal_shift.unwrap_or(0.5);
    let steps = window.step_range(&scenario.model().control_grid())?;
    let shifted = star.shifted(steps, shift);
    let ds = directional_derivative(&shifted, &scenario, &spec, 0.0, n_paths, seed)?;
    let sign = shift.signum();
    checks.push(Check::greater(
        "shifted_derivative_toward_optimal",
        sign * ds.mean,
        3.0 * ds.std_error,
    ));
    put(&mut results, "shifted_derivative_at_0", ds);

    // u ≡ 0 in an informative direction: the minimum moves away from 0
    let informative = function(config.suboptimal_theta0.as_deref().unwrap_or("L"), bound)?;
    let zero_spec = PerturbationSpec {
        theta0: informative,
        ..spec.clone()
    };
    let zero = perturbation_sweep(&ControlPolicy::zero(), &scenario, &zero_spec, n_paths, seed)?;
    push_sweep(&mut table, &zero);
    checks.push(Check::greater("zero_policy_argmin_nonzero", zero.argmin.abs(), 0.0));
    let z0 = at(&zero, 0.0).expect("grid contains 0");
    let zmin = at(&zero, zero.argmin).expect("argmin is on the grid");
    checks.push(Check::greater(
        "zero_policy_margin",
        z0.mean - zmin.mean,
        3.0 * pooled_se(&z0, &zmin),
    ));
    put(&mut results, "zero_policy_argmin", zero.argmin);
    put(&mut results, "diverged_paths", sweep.diverged.len() + zero.diverged.len());
    Ok(Report { checks, table, results })
}
