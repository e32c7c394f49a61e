//! Properties of the cost functional along perturbations and routes.

use insider_core::hjb_insider::{example1_policy, example2_policy};
use insider_core::optimality_lab::{cost_mc, perturbation_sweep, PerturbationSpec, Route, Scenario, TestFunction};
use insider_core::params::{CostFunctional, Dynamics, ModelParams};
use insider_core::paths::Window;

#[test]
fn second_difference_is_exact() {
    // with common paths F(y) + F(−y) − 2F(0) = 2 a y² ∫θ² exactly
    let params = ModelParams::benchmark();
    let scenario = Scenario::new(params.clone(), Dynamics::Wealth, CostFunctional::Terminal, 128).unwrap();
    let window = Window::new(0.25, 0.5).unwrap();
    let spec = PerturbationSpec::new(window, TestFunction::constant(1.0)).with_amplitudes(vec![-0.3, 0.0, 0.3]);
    let sweep = perturbation_sweep(&example1_policy(&params), &scenario, &spec, 200, 3).unwrap();
    let f: Vec<f64> = sweep.rows.iter().map(|r| r.cost.mean).collect();
    let second = f[0] + f[2] - 2.0 * f[1];
    assert!((second - 2.0 * 0.09 * 0.25).abs() < 1e-12, "{second}");
}

#[test]
fn routes_agree_on_unit_drift() {
    let params = ModelParams::benchmark();
    let forward = Scenario::new(params.clone(), Dynamics::UnitDrift, CostFunctional::Terminal, 256).unwrap();
    let insider = forward.clone().with_route(Route::Insider);
    let policy = example2_policy(&params);
    let a = cost_mc(&policy, &forward, 300, 5).unwrap().estimate.mean;
    let b = cost_mc(&policy, &insider, 300, 5).unwrap().estimate.mean;
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
}

#[test]
fn cost_does_not_depend_on_workers() {
    let params = ModelParams::benchmark();
    let scenario = Scenario::new(params.clone(), Dynamics::Wealth, CostFunctional::Terminal, 128).unwrap();
    let policy = example1_policy(&params);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| cost_mc(&policy, &scenario, 500, 9).unwrap().estimate);
    let b = four.install(|| cost_mc(&policy, &scenario, 500, 9).unwrap().estimate);
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
}
