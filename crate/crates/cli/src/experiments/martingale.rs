use insider_core::controlled_sde::ControlPolicy;
use insider_core::hjb_insider::example1_policy;
use insider_core::monte_carlo::{information_model, map_paths, path_field, InformationMode};
use insider_core::optimality_lab::{
    discounted_noise_trapezoid, martingale_diagnostic, recovery_constant, semimartingale_recovery, MartingaleCell,
    Scenario, TestFunction,
};
use insider_core::params::{CostFunctional, Dynamics, ModelParams};
use insider_core::paths::{Profile, TimeFunction};
use serde_json::{json, Map};

use super::{put, Check, Report, RunError};
use crate::config::ExperimentConfig;
use crate::output::Table;

fn push_cells(table: &mut Table, policy: &str, cells: &[MartingaleCell]) {
    for c in cells {
        table.push(vec![
            policy.into(),
            c.window.start.into(),
            c.window.end.into(),
            c.test_function.as_str().into(),
            c.estimate.mean.into(),
            c.estimate.std_error.into(),
            c.z.into(),
            c.pass.into(),
        ]);
    }
}

/// Worst recovery error over `n_paths` paths, and the worst ratio of that
/// error to its bound `K dt Σ|ΔB|` (`None` for constant-σ, `r = 0` cases
/// where the bound is 0).
struct Recovery {
    max_error: f64,
    max_ratio: Option<f64>,
    constant: f64,
}

fn recovery(params: &ModelParams, n_steps: usize, n_paths: usize, seed: u64) -> Result<Recovery, RunError> {
    let model = information_model(params, n_steps)?;
    let k = recovery_constant(params)
        .ok_or_else(|| RunError::Invalid("recovery needs σ bounded away from zero".into()))?;
    let sigma_inf = params.sigma.profile().map_or(0.0, |p| p.inf_abs(0.0, params.horizon));
    let lower = 0.5 * sigma_inf * (-params.r.abs() * params.horizon).exp();
    let n = model.horizon_index();
    let dt = model.control_grid().dt();
    let per_path = map_paths(n_paths, |p| -> Result<(f64, f64, f64), RunError> {
        let field = path_field(&model, InformationMode::Uninformed, seed, p)?;
        let b = field.path().truncate(n)?;
        let r = discounted_noise_trapezoid(params, &b)?;
        let back = semimartingale_recovery(&r, params, lower)?;
        let err = back
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let variation: f64 = (0..n).map(|i| b.increment(i).abs()).sum();
        Ok((err, k * variation, k * variation * dt))
    });
    let rows = per_path.into_iter().collect::<Result<Vec<_>, _>>()?;
    let max_error = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let constant = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_ratio = if k > 0.0 {
        Some(rows.iter().map(|r| r.0 / r.2).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(Recovery {
        max_error,
        max_ratio,
        constant,
    })
}

pub fn run(config: &ExperimentConfig) -> Result<Report, RunError> {
    let params = config.model.to_params();
    let (n_paths, seed) = (config.n_paths(), config.seed());
    let bound = config.theta_bound.unwrap_or(10.0);
    let windows = config.windows.clone().unwrap_or_default();
    let functions = config
        .test_functions
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .map(|n| TestFunction::by_name(n, bound).ok_or_else(|| RunError::Invalid(format!("unknown function \"{n}\""))))
        .collect::<Result<Vec<_>, _>>()?;

    let mut checks = Vec::new();
    let mut results = Map::new();
    let mut table = Table::new(config.kind.csv_columns());

    // u*: every cell is centred
    let scenario = Scenario::new(params.clone(), Dynamics::Wealth, CostFunctional::Terminal, config.n_steps())?;
    let cells = martingale_diagnostic(&example1_policy(&params), &scenario, &functions, &windows, n_paths, seed)?;
    push_cells(&mut table, "optimal", &cells);
    for c in &cells {
        checks.push(Check::within_se(
            format!("optimal ({}, {}] {}", c.window.start, c.window.end, c.test_function),
            c.estimate.mean,
            0.0,
            c.estimate.std_error,
            3.0,
        ));
    }

    // u ≡ 0 with nearly revealed information: some cell must fail
    let mut strong = params.clone();
    strong.info_horizon = config.negative_info_horizon.unwrap_or(1.05 * params.horizon);
    let neg_steps = config.negative_n_steps.unwrap_or(1000);
    let neg_scenario = Scenario::new(strong, Dynamics::Wealth, CostFunctional::Terminal, neg_steps)?;
    let neg = martingale_diagnostic(&ControlPolicy::zero(), &neg_scenario, &functions, &windows, n_paths, seed)?;
    push_cells(&mut table, "zero", &neg);
    let worst = neg.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    checks.push(Check::greater("zero_policy_max_abs_z", worst, 3.0));
    put(&mut results, "optimal_cells_passing", cells.iter().filter(|c| c.pass).count());
    put(&mut results, "zero_policy_cells_failing", neg.iter().filter(|c| !c.pass).count());
    put(&mut results, "zero_policy_max_abs_z", worst);

    // recovery of B from R = ∫ e^{-b} σ dB
    let rec_paths = config.recovery_paths.unwrap_or(100);
    let mut rec_results = Vec::new();
    let sigma = config.recovery_sigma.unwrap_or(Profile::Sine {
        offset: 1.0,
        amplitude: 0.5,
        frequency: 1.0,
    });
    let cases = [
        ("sigma=1,r=0", Profile::Constant { value: 1.0 }, 0.0),
        ("sigma=2,r=0", Profile::Constant { value: 2.0 }, 0.0),
        ("configured", sigma, config.recovery_r.unwrap_or(0.05)),
    ];
    for (label, profile, r) in cases {
        let mut p = params.clone();
        p.sigma = TimeFunction::from(profile);
        p.r = r;
        let rec = recovery(&p, config.n_steps(), rec_paths, seed)?;
        match rec.max_ratio {
            Some(ratio) => checks.push(Check::at_most(format!("recovery {label}: error / (C dt)"), ratio, 1.0)),
            None => checks.push(Check::at_most(format!("recovery {label}: max error"), rec.max_error, 1e-12)),
        }
        rec_results.push(json!({
            "case": label,
            "sigma": profile,
            "r": r,
            "max_error": rec.max_error,
            "C": rec.constant,
            "dt": p.horizon / config.n_steps() as f64,
        }));
    }
    put(&mut results, "recovery", rec_results);
    Ok(Report { checks, table, results })
}
