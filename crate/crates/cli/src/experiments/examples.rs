use insider_core::controlled_sde::{control_moment, ControlPolicy};
use insider_core::enlargement::drift_second_moment;
use insider_core::hjb_insider::{example1_control, example1_policy, example1_value, example2_control, example2_policy, example2_value};
use insider_core::monte_carlo::{map_paths, InformationMode};
use insider_core::optimality_lab::{cost_mc, Scenario};
use insider_core::params::{CostFunctional, Dynamics, ModelParams};
use insider_core::stats::pooled_se;
use insider_core::EstimateWithError;
use serde_json::Map;

use super::{put, Check, Report, RunError};
use crate::config::{ExperimentConfig, PolicyConfig};
use crate::output::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    One,
    Two,
}

/// Panels of the outer Simpson rule for the closed-form value.
const VALUE_PANELS: usize = 256;

/// `V(t0, x0)` by quadrature of the deterministic `E[α_s²]`:
///
/// * wealth: `−x b e^{r(T−t)} − (b²/4a) ∫ σ² e^{−2r(s−T)} E[α²] ds`
/// * unit drift: `−b x − (b²/4a) ∫ (E[α²] + 1) ds`
pub fn closed_form_value(which: Which, params: &ModelParams) -> Result<f64, RunError> {
    let (t0, t1) = (params.t0, params.horizon);
    let h = (t1 - t0) / (2 * VALUE_PANELS) as f64;
    let mut acc = 0.0;
    for k in 0..=2 * VALUE_PANELS {
        let s = if k == 2 * VALUE_PANELS { t1 } else { t0 + k as f64 * h };
        let a2 = drift_second_moment(&params.weight, s, params.info_horizon)?;
        let f = match which {
            Which::One => params.sigma.eval(s).powi(2) * (-2.0 * params.r * (s - t1)).exp() * a2,
            Which::Two => a2 + 1.0,
        };
        let w = if k == 0 || k == 2 * VALUE_PANELS {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * f;
    }
    let integral = acc * h / 3.0;
    let k = params.b * params.b / (4.0 * params.a);
    Ok(match which {
        Which::One => -params.x0 * params.b * (params.r * (t1 - t0)).exp() - k * integral,
        Which::Two => -params.b * params.x0 - k * integral,
    })
}

/// Paths for the moment checks of `u*`.
const ADMISSIBILITY_PATHS: usize = 2000;
const MOMENT_ORDERS: [i32; 3] = [2, 4, 8];

/// `E ∫|u*|^k dt` for each order, and `E[(∫ σ² α² ds)²]`, the fourth
/// moment behind the growth envelope of the value field.
fn admissibility(
    which: Which,
    star: &ControlPolicy,
    scenario: &Scenario,
    seed: u64,
) -> Result<(Vec<EstimateWithError>, EstimateWithError), RunError> {
    let params = scenario.params();
    let per_path = map_paths(ADMISSIBILITY_PATHS, |p| -> Result<(Vec<f64>, f64), RunError> {
        let field = scenario.field(seed, p)?;
        let path = scenario.simulate(star, &field)?;
        let moments = MOMENT_ORDERS.iter().map(|&k| control_moment(&path, k)).collect();
        let grid = path.grid();
        let first = path.start_index();
        let envelope: f64 = (0..grid.n_steps())
            .map(|i| {
                let sigma = match which {
                    Which::One => params.sigma.eval(grid.time(i)),
                    Which::Two => 1.0,
                };
                (sigma * field.drift()[first + i]).powi(2) * grid.dt()
            })
            .sum();
        Ok((moments, envelope * envelope))
    });
    let rows = per_path.into_iter().collect::<Result<Vec<_>, _>>()?;
    let moments = (0..MOMENT_ORDERS.len())
        .map(|j| EstimateWithError::from_samples(&rows.iter().map(|r| r.0[j]).collect::<Vec<_>>(), seed))
        .collect::<Result<Vec<_>, _>>()?;
    let envelope = EstimateWithError::from_samples(&rows.iter().map(|r| r.1).collect::<Vec<_>>(), seed)?;
    Ok((moments, envelope))
}

fn optimal(which: Which, params: &ModelParams) -> ControlPolicy {
    match which {
        Which::One => example1_policy(params),
        Which::Two => example2_policy(params),
    }
}

pub fn policy_name(p: &PolicyConfig) -> String {
    match p {
        PolicyConfig::Optimal => "optimal".into(),
        PolicyConfig::Zero => "zero".into(),
        PolicyConfig::Constant { value } => format!("constant({value})"),
        PolicyConfig::ScaledOptimal { factor } => format!("scaled_optimal({factor})"),
        PolicyConfig::ShiftedOptimal { shift, window } => {
            format!("shifted_optimal({shift} on ({}, {}])", window.start, window.end)
        }
        PolicyConfig::UninformedOptimal => "uninformed_optimal".into(),
        PolicyConfig::InfoLinear { coef } => format!("info_linear({coef})"),
    }
}

fn build_policy(which: Which, cfg: &PolicyConfig, scenario: &Scenario) -> Result<ControlPolicy, RunError> {
    let params = scenario.params().clone();
    let star = optimal(which, &params);
    let name = policy_name(cfg);
    Ok(match cfg {
        PolicyConfig::Optimal => star,
        PolicyConfig::Zero => ControlPolicy::zero(),
        PolicyConfig::Constant { value } => ControlPolicy::constant(*value),
        PolicyConfig::ScaledOptimal { factor } => {
            let f = *factor;
            ControlPolicy::new(name, move |obs| f * star.control(obs))
        }
        PolicyConfig::ShiftedOptimal { shift, window } => {
            let steps = window.step_range(&scenario.model().control_grid())?;
            star.shifted(steps, *shift)
        }
        PolicyConfig::UninformedOptimal => match which {
            Which::One => ControlPolicy::new(name, move |obs| {
                example1_control(0.0, params.sigma.eval(obs.time), obs.time, &params)
            }),
            Which::Two => ControlPolicy::constant(example2_control(0.0, &params)),
        },
        PolicyConfig::InfoLinear { coef } => {
            let c = *coef;
            ControlPolicy::new(name, move |obs| star.control(obs) + c * obs.info.clamp(-10.0, 10.0))
        }
    })
}

fn row(table: &mut Table, policy: &str, est: &EstimateWithError, reference: &EstimateWithError) {
    table.push(vec![
        policy.into(),
        est.n_samples.into(),
        est.seed.into(),
        est.mean.into(),
        est.std_error.into(),
        (est.mean - reference.mean).into(),
        pooled_se(est, reference).into(),
    ]);
}

pub fn run(config: &ExperimentConfig, which: Which) -> Result<Report, RunError> {
    let params = config.model.to_params();
    let dynamics = match which {
        Which::One => Dynamics::Wealth,
        Which::Two => Dynamics::UnitDrift,
    };
    let n_steps = config.n_steps();
    let seed = config.seed();
    let scenario = Scenario::new(params.clone(), dynamics, CostFunctional::Terminal, n_steps)?;
    let star = optimal(which, &params);
    let dom_paths = config.dominance_paths.unwrap_or(20_000);

    let mut checks = Vec::new();
    let mut results = Map::new();
    let mut table = Table::new(config.kind.csv_columns());

    // value certificate
    let closed = closed_form_value(which, &params)?;
    let exact = EstimateWithError {
        mean: closed,
        std_error: 0.0,
        n_samples: 0,
        seed,
    };
    let value_mc = cost_mc(&star, &scenario, config.n_paths(), seed)?.estimate;
    row(&mut table, "optimal", &value_mc, &exact);
    checks.push(Check::within_se("value_certificate", value_mc.mean, closed, value_mc.std_error, 3.0));
    put(&mut results, "value_mc", value_mc.mean);
    put(&mut results, "value_mc_std_error", value_mc.std_error);
    put(&mut results, "value_closed_form", closed);

    // E[G(t0, x0)] from the value field, on an independent batch
    let field_seed = seed.wrapping_add(1);
    let value_field = match which {
        Which::One => example1_value(&params, params.t0, params.x0, n_steps, dom_paths, field_seed)?,
        Which::Two => example2_value(&params, params.t0, params.x0, n_steps, dom_paths, field_seed)?,
    };
    row(&mut table, "value_field", &value_field, &value_mc);
    checks.push(Check::within_se(
        "value_field_matches_cost",
        value_field.mean,
        value_mc.mean,
        pooled_se(&value_field, &value_mc),
        3.0,
    ));
    put(&mut results, "value_field_mc", value_field.mean);
    put(&mut results, "value_field_std_error", value_field.std_error);

    // no-information limit
    if which == Which::Two {
        let c = example2_control(0.0, &params);
        let expected = params.b / (2.0 * params.a);
        checks.push(Check::equal("uninformed_control", c, expected));
        let blind = scenario.clone().with_information(InformationMode::Uninformed);
        let est = cost_mc(&star, &blind, dom_paths, seed)?.estimate;
        let span = params.horizon - params.t0;
        let analytic = params.a * c * c * span - params.b * (params.x0 + c * span);
        let reference = EstimateWithError {
            mean: analytic,
            ..exact
        };
        row(&mut table, "optimal_without_information", &est, &reference);
        checks.push(Check::within_se("no_information_cost", est.mean, analytic, est.std_error, 3.0));
        put(&mut results, "no_information_cost", est.mean);
        put(&mut results, "no_information_cost_closed_form", analytic);
    }

    // finite moments of u* and of the envelope, on a small batch
    let (moments, envelope) = admissibility(which, &star, &scenario, seed)?;
    for (k, m) in MOMENT_ORDERS.iter().zip(&moments) {
        checks.push(Check::finite(format!("admissible_moment_k={k}"), m.mean));
    }
    checks.push(Check::finite("envelope_fourth_moment", envelope.mean));
    put(&mut results, "control_moments", &moments);
    put(&mut results, "envelope_fourth_moment", envelope);

    // dominance, all policies on the same paths
    let star_dom = cost_mc(&star, &scenario, dom_paths, seed)?.estimate;
    row(&mut table, "optimal", &star_dom, &star_dom);
    let mut dominance = Vec::new();
    for cfg in config.policies.as_deref().unwrap_or(&[]) {
        let name = policy_name(cfg);
        let policy = build_policy(which, cfg, &scenario)?;
        let est = cost_mc(&policy, &scenario, dom_paths, seed)?.estimate;
        row(&mut table, &name, &est, &star_dom);
        let pooled = pooled_se(&est, &star_dom);
        checks.push(Check::at_least(format!("dominance {name}"), est.mean, star_dom.mean - 3.0 * pooled));
        dominance.push(serde_json::json!({ "policy": name, "cost": est.mean, "std_error": est.std_error }));
    }
    put(&mut results, "optimal_cost_dominance_batch", star_dom.mean);
    put(&mut results, "dominance", dominance);
    Ok(Report { checks, table, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_closed_forms() {
        let p = ModelParams::benchmark();
        let v1 = closed_form_value(Which::One, &p).unwrap();
        assert!((v1 + std::f64::consts::LN_2 / 4.0).abs() < 1e-9, "{v1}");
        let v2 = closed_form_value(Which::Two, &p).unwrap();
        assert!((v2 + (std::f64::consts::LN_2 + 1.0) / 4.0).abs() < 1e-9, "{v2}");
    }

    #[test]
    fn discounted_closed_form() {
        // with r ≠ 0 and σ ≡ s, m ≡ 1: E[α²] = 1/(T1 − s)
        let mut p = ModelParams::benchmark();
        p.r = 0.1;
        p.x0 = 2.0;
        let v = closed_form_value(Which::One, &p).unwrap();
        let integral = insider_core::paths::simpson(|s| (-0.2 * (s - 1.0)).exp() / (2.0 - s), 0.0, 1.0, 4096);
        let expect = -2.0 * 0.1f64.exp() - integral / 4.0;
        assert!((v - expect).abs() < 1e-9);
    }
}
