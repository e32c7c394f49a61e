use insider_core::hjb_insider::{example1_control, hjb_pointwise_infimum, AffineValueField};
use insider_core::monte_carlo::{information_model, map_paths, path_field, InformationMode};
use insider_core::paths::path_rng;
use rand::Rng;
use serde_json::Map;

use super::{put, Check, Report, RunError};
use crate::config::ExperimentConfig;
use crate::output::Table;

/// Stream reserved for drawing probe locations.
const PROBE_STREAM: u64 = u64::MAX - 1;

struct Probe {
    path: usize,
    node: usize,
    x: f64,
}

struct Outcome {
    t: f64,
    alpha: f64,
    residual: f64,
    u_hjb: f64,
    u_closed: f64,
    rel_error: f64,
}

pub fn run(config: &ExperimentConfig) -> Result<Report, RunError> {
    let params = config.model.to_params();
    let model = information_model(&params, config.n_steps())?;
    let n = model.horizon_index();
    let seed = config.seed();
    let x_range = config.x_range.unwrap_or(5.0);
    let n_probes = config.probes.unwrap_or(1000);

    let mut rng = path_rng(seed, PROBE_STREAM);
    let probes: Vec<Probe> = (0..n_probes)
        .map(|_| Probe {
            path: rng.random_range(0..config.n_paths()),
            node: rng.random_range(0..=n),
            x: rng.random_range(-x_range..=x_range),
        })
        .collect();

    let results = map_paths(probes.len(), |j| -> Result<Outcome, RunError> {
        let probe = &probes[j];
        let field = path_field(&model, InformationMode::Insider, seed, probe.path)?;
        let vf = AffineValueField::example1(&params, &field, 0.0);
        let i = probe.node;
        let t = vf.grid().time(i);
        let alpha = vf.drift(i);
        let sigma = params.sigma.eval(t);
        let (gt, gx, gxx) = vf.derivatives(i, probe.x);
        let (u_hjb, residual) = hjb_pointwise_infimum(gt, gx, gxx, alpha, sigma, &params, probe.x, t)?;
        let u_closed = example1_control(alpha, sigma, t, &params);
        let rel_error = if u_closed == 0.0 {
            u_hjb.abs()
        } else {
            ((u_hjb - u_closed) / u_closed).abs()
        };
        Ok(Outcome {
            t,
            alpha,
            residual,
            u_hjb,
            u_closed,
            rel_error,
        })
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(config.kind.csv_columns());
    for (j, (probe, o)) in probes.iter().zip(&outcomes).enumerate() {
        table.push(vec![
            j.into(),
            probe.path.into(),
            o.t.into(),
            probe.x.into(),
            o.alpha.into(),
            o.residual.into(),
            o.u_hjb.into(),
            o.u_closed.into(),
            o.rel_error.into(),
        ]);
    }
    let max_residual = outcomes.iter().map(|o| o.residual.abs()).fold(0.0, f64::max);
    let max_rel = outcomes.iter().map(|o| o.rel_error).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("max_abs_hjb_residual", max_residual, 1e-10),
        Check::at_most("max_minimizer_rel_error", max_rel, 1e-12),
    ];
    let mut results = Map::new();
    put(&mut results, "probes", n_probes);
    put(&mut results, "max_abs_hjb_residual", max_residual);
    put(&mut results, "max_minimizer_rel_error", max_rel);
    Ok(Report { checks, table, results })
}
