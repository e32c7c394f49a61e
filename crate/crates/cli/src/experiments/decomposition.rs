use insider_core::enlargement::{decompose, drift_integral};
use insider_core::monte_carlo::{information_model, map_paths, path_field, InformationMode};
use insider_core::stats::{correlation, mean, sample_variance};
use serde_json::Map;

use super::{put, Check, Report, RunError};
use crate::config::ExperimentConfig;
use crate::output::Table;

/// Per-path record at the sampled nodes.
struct PathStats {
    btilde: Vec<f64>,
    alpha_sq: Vec<f64>,
    info: f64,
    /// `max_i |B̃_i + ∫α − B_i| / (ε (|B_i| + |∫α|))`.
    reconstruction: f64,
}

pub fn run(config: &ExperimentConfig) -> Result<Report, RunError> {
    let params = config.model.to_params();
    let model = information_model(&params, config.n_steps())?;
    let n = model.horizon_index();
    let stride = (n / 16).max(1);
    let mut nodes: Vec<usize> = (0..=n).step_by(stride).collect();
    if nodes.last() != Some(&n) {
        nodes.push(n);
    }
    let seed = config.seed();

    let results = map_paths(config.n_paths(), |p| -> Result<PathStats, RunError> {
        let field = path_field(&model, InformationMode::Insider, seed, p)?;
        let bt = decompose(field.path(), &field)?;
        let s = drift_integral(&field);
        let b = field.path().values();
        let mut worst: f64 = 0.0;
        for i in 0..=n {
            let err = (bt.at(i) + s[i] - b[i]).abs();
            let scale = f64::EPSILON * (b[i].abs() + s[i].abs());
            if err > 0.0 {
                worst = worst.max(err / scale);
            }
        }
        Ok(PathStats {
            btilde: nodes.iter().map(|&i| bt.at(i)).collect(),
            alpha_sq: nodes.iter().map(|&i| field.drift()[i].powi(2)).collect(),
            info: field.info(),
            reconstruction: worst,
        })
    });
    let stats = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let infos: Vec<f64> = stats.iter().map(|s| s.info).collect();
    let n_paths = stats.len() as f64;

    let grid = model.control_grid();
    let mut table = Table::new(config.kind.csv_columns());
    let (mut var_t, mut corr_t) = (0.0, 0.0);
    for (j, &i) in nodes.iter().enumerate() {
        let bt: Vec<f64> = stats.iter().map(|s| s.btilde[j]).collect();
        let a2: Vec<f64> = stats.iter().map(|s| s.alpha_sq[j]).collect();
        let var = sample_variance(&bt);
        let corr = if i == 0 { 0.0 } else { correlation(&bt, &infos) };
        table.push(vec![
            grid.time(i).into(),
            var.into(),
            corr.into(),
            mean(&a2).into(),
            model.drift_second_moment_at(i).into(),
        ]);
        if i == n {
            var_t = var;
            corr_t = corr;
        }
    }
    let recon = stats.iter().map(|s| s.reconstruction).fold(0.0, f64::max);
    let horizon = params.horizon;
    let corr_se = 1.0 / (n_paths - 1.0).sqrt();

    let checks = vec![
        Check::within_rel("var_btilde_T", var_t, horizon, 0.05),
        Check::within_se("corr_btilde_T_L", corr_t, 0.0, corr_se, 3.0),
        Check::at_most("reconstruction_error_eps_units", recon, 1.0),
    ];
    let mut results = Map::new();
    put(&mut results, "var_btilde_T", var_t);
    put(&mut results, "corr_btilde_T_L", corr_t);
    put(&mut results, "corr_std_error", corr_se);
    put(&mut results, "var_L", sample_variance(&infos));
    put(&mut results, "var_L_closed_form", model.tail_integral(0));
    put(&mut results, "reconstruction_error_eps_units", recon);
    Ok(Report {
        checks,
        table,
        results,
    })
}
