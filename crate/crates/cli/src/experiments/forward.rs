use insider_core::forward_integral::{forward_estimate, ito_left_sum, Integrand};
use insider_core::monte_carlo::{information_model, map_paths, path_field, InformationMode};
use insider_core::stats::{mean, median};
use serde_json::Map;

use super::{put, Check, Report, RunError};
use crate::config::ExperimentConfig;
use crate::output::Table;

struct PathStats {
    /// Integrands whose forward(dt) and Itô sums differ in any bit.
    mismatches: [bool; 3],
    /// `|forward(k dt) − (B_T² − T)/2|` for each ladder entry, `v = B`.
    deviations: Vec<f64>,
}

pub fn run(config: &ExperimentConfig) -> Result<Report, RunError> {
    let params = config.model.to_params();
    let model = information_model(&params, config.n_steps())?;
    let n = model.horizon_index();
    let mut ladder = config.eps_ladder.clone().unwrap_or_else(|| vec![8, 4, 2, 1]);
    ladder.sort_unstable_by(|a, b| b.cmp(a));
    ladder.dedup();
    let seed = config.seed();
    let dt = model.control_grid().dt();
    let horizon = params.horizon;

    let results = map_paths(config.n_paths(), |p| -> Result<PathStats, RunError> {
        let field = path_field(&model, InformationMode::Insider, seed, p)?;
        let b = field.path().truncate(n)?;
        let integrands = [
            Integrand::constant(b.grid(), 1.0)?,
            Integrand::from_path(&b),
            Integrand::new(field.drift().to_vec(), true)?,
        ];
        let mut mismatches = [false; 3];
        for (flag, v) in mismatches.iter_mut().zip(&integrands) {
            let fwd = forward_estimate(v, &b, dt)?;
            *flag = fwd.to_bits() != ito_left_sum(v, &b)?.to_bits();
        }
        let target = 0.5 * (b.last() * b.last() - horizon);
        let deviations = ladder
            .iter()
            .map(|&k| Ok((forward_estimate(&integrands[1], &b, k as f64 * dt)? - target).abs()))
            .collect::<Result<Vec<_>, RunError>>()?;
        Ok(PathStats { mismatches, deviations })
    });
    let stats = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(config.kind.csv_columns());
    let mut medians = Vec::with_capacity(ladder.len());
    for (j, &k) in ladder.iter().enumerate() {
        let devs: Vec<f64> = stats.iter().map(|s| s.deviations[j]).collect();
        let med = median(&devs);
        medians.push(med);
        table.push(vec![k.into(), (k as f64 * dt).into(), med.into(), mean(&devs).into()]);
    }

    let mut checks = Vec::new();
    for (i, name) in ["one", "B", "alpha"].iter().enumerate() {
        let count = stats.iter().filter(|s| s.mismatches[i]).count();
        checks.push(Check::equal(format!("bit_exact_mismatches_v_{name}"), count as f64, 0.0));
    }
    for w in ladder.windows(2).zip(medians.windows(2)) {
        let ((k0, k1), (m0, m1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
        checks.push(Check::less(format!("median_dev_{k1}dt_below_{k0}dt"), m1, m0));
    }
    let mut results = Map::new();
    put(&mut results, "eps_steps", &ladder);
    put(&mut results, "median_abs_dev", &medians);
    Ok(Report { checks, table, results })
}
