//! Browser demo: insider paths, the perturbation curve of the wealth
//! example and its value as the information horizon varies. Each export is
//! a thin wrapper over a plain function that is tested natively.

use insider_core::enlargement::{decompose, drift_second_moment};
use insider_core::hjb_insider::example1_policy;
use insider_core::monte_carlo::{information_model, path_field, InformationMode};
use insider_core::optimality_lab::{perturbation_sweep, PerturbationSpec, Scenario, TestFunction};
use insider_core::controlled_sde::ControlPolicy;
use insider_core::params::{CostFunctional, Dynamics, ModelParams};
use insider_core::paths::{simpson, Window};
use insider_core::LabError;
use wasm_bindgen::prelude::*;

fn benchmark(info_horizon: f64) -> ModelParams {
    let mut p = ModelParams::benchmark();
    p.info_horizon = info_horizon;
    p
}

/// `[t…, B…, B̃…]` on `[0, T]` for one path of the benchmark model.
pub fn path_triplet(seed: u64, path: usize, info_horizon: f64, n_steps: usize) -> Result<Vec<f64>, LabError> {
    let model = information_model(&benchmark(info_horizon), n_steps)?;
    let field = path_field(&model, InformationMode::Insider, seed, path)?;
    let bt = decompose(field.path(), &field)?;
    let grid = bt.grid();
    let mut out = grid.times();
    out.extend_from_slice(&field.path().values()[..grid.len()]);
    out.extend_from_slice(bt.values());
    Ok(out)
}

/// `[y, F(y), SE]` triples along `u + y χ_(start, end]` for `u = u*` or
/// `u ≡ 0`, with `θ0 = theta0`.
pub fn sweep(
    seed: u64,
    n_paths: usize,
    n_steps: usize,
    info_horizon: f64,
    window: (f64, f64),
    theta0: &str,
    optimal: bool,
) -> Result<Vec<f64>, LabError> {
    let params = benchmark(info_horizon);
    let scenario = Scenario::new(params.clone(), Dynamics::Wealth, CostFunctional::Terminal, n_steps)?;
    let theta = TestFunction::by_name(theta0, 10.0)
        .ok_or_else(|| LabError::InvalidArgument(format!("unknown direction \"{theta0}\"")))?;
    let spec = PerturbationSpec::new(Window::new(window.0, window.1)?, theta);
    let policy = if optimal {
        example1_policy(&params)
    } else {
        ControlPolicy::zero()
    };
    let table = perturbation_sweep(&policy, &scenario, &spec, n_paths, seed)?;
    Ok(table
        .rows
        .iter()
        .flat_map(|r| [r.y, r.cost.mean, r.cost.std_error])
        .collect())
}

/// Closed-form value of the wealth benchmark, `−¼ ∫₀¹ E[α_s²] ds`, for
/// each information horizon `T₁ > 1`.
pub fn value_by_horizon(info_horizons: &[f64]) -> Result<Vec<f64>, LabError> {
    info_horizons
        .iter()
        .map(|&t1| {
            let params = benchmark(t1);
            params.validate()?;
            // validate() guarantees s < T1 on [0, T]
            let integral = simpson(
                |s| drift_second_moment(&params.weight, s, t1).unwrap_or(f64::NAN),
                0.0,
                params.horizon,
                256,
            );
            Ok(-integral / 4.0)
        })
        .collect()
}

fn js(e: LabError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = pathTriplet)]
pub fn path_triplet_js(seed: u32, path: u32, info_horizon: f64, n_steps: u32) -> Result<Vec<f64>, JsError> {
    path_triplet(seed.into(), path as usize, info_horizon, n_steps as usize).map_err(js)
}

#[wasm_bindgen(js_name = perturbationSweep)]
#[allow(clippy::too_many_arguments)]
pub fn sweep_js(
    seed: u32,
    n_paths: u32,
    n_steps: u32,
    info_horizon: f64,
    start: f64,
    end: f64,
    theta0: &str,
    optimal: bool,
) -> Result<Vec<f64>, JsError> {
    sweep(
        seed.into(),
        n_paths as usize,
        n_steps as usize,
        info_horizon,
        (start, end),
        theta0,
        optimal,
    )
    .map_err(js)
}

#[wasm_bindgen(js_name = valueByHorizon)]
pub fn value_by_horizon_js(info_horizons: &[f64]) -> Result<Vec<f64>, JsError> {
    value_by_horizon(info_horizons).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_reconstructs() {
        let v = path_triplet(1, 0, 2.0, 64).unwrap();
        assert_eq!(v.len(), 3 * 65);
        assert_eq!(v[64], 1.0);
        assert_eq!(v[65], 0.0);
        assert_eq!(v[130], 0.0);
    }

    #[test]
    fn optimal_sweep_bottoms_out_at_zero() {
        let v = sweep(3, 2000, 64, 2.0, (0.25, 0.5), "1", true).unwrap();
        let rows: Vec<_> = v.chunks(3).collect();
        assert_eq!(rows.len(), 11);
        let best = rows.iter().min_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
        assert_eq!(best[0], 0.0);
    }

    #[test]
    fn value_matches_log_formula() {
        for (t1, v) in [1.5f64, 2.0, 4.0].into_iter().zip(value_by_horizon(&[1.5, 2.0, 4.0]).unwrap()) {
            let exact = -0.25 * (t1 / (t1 - 1.0)).ln();
            assert!((v - exact).abs() < 1e-8, "{t1}: {v} vs {exact}");
        }
        assert!(value_by_horizon(&[1.0]).is_err());
    }
}
