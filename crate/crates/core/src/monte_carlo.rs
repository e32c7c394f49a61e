//! Path batches: the simulation grid of an experiment and an ordered
//! parallel map over path indices.
//!
//! Path `p` of a batch with seed `s` is always stream `p` of `s`, whatever
//! the worker count, and results come back in path order so every
//! reduction is a fixed-order sum.

use std::sync::Arc;

use rayon::prelude::*;

use crate::enlargement::{GaussianInformation, InfoDriftField};
use crate::error::{invalid, Result};
use crate::params::ModelParams;
use crate::paths::{sample_brownian_stream, TimeGrid};

/// Uniform grid on `[0, T₁]` with `dt = T / n_steps`; `T₁` must be a
/// whole number of steps.
pub fn simulation_grid(params: &ModelParams, n_steps: usize) -> Result<TimeGrid> {
    if n_steps == 0 {
        return Err(invalid("n_steps must be at least 1"));
    }
    let dt = params.horizon / n_steps as f64;
    let ratio = params.info_horizon / dt;
    let n_full = ratio.round();
    if (ratio - n_full).abs() > 1e-9 * ratio.max(1.0) {
        return Err(invalid(format!(
            "T1 = {} is not a whole number of steps of dt = T / n_steps = {dt}; \
             T must be a node of the [0, T1] grid",
            params.info_horizon
        )));
    }
    TimeGrid::with_spacing(0.0, dt, n_full as usize)
}

/// Gaussian information model of `params` on its simulation grid.
pub fn information_model(params: &ModelParams, n_steps: usize) -> Result<Arc<GaussianInformation>> {
    params.validate()?;
    let grid = simulation_grid(params, n_steps)?;
    let model = GaussianInformation::new(params.weight.clone(), grid, params.horizon)?;
    params.validate_sigma(&model.control_grid())?;
    Ok(Arc::new(model))
}

/// Whether a path is seen by an insider or by an agent without `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InformationMode {
    Insider,
    Uninformed,
}

/// Field of path `p` of the batch `seed`.
pub fn path_field(model: &Arc<GaussianInformation>, mode: InformationMode, seed: u64, p: usize) -> Result<InfoDriftField> {
    let path = sample_brownian_stream(model.full_grid(), seed, p as u64);
    match mode {
        InformationMode::Insider => model.field(path),
        InformationMode::Uninformed => model.uninformed(path),
    }
}

/// Ordered parallel map over `0..n_paths`.
pub fn map_paths<R: Send>(n_paths: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    (0..n_paths).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_alignment() {
        let p = ModelParams::benchmark();
        let g = simulation_grid(&p, 256).unwrap();
        assert_eq!(g.n_steps(), 512);
        assert!((g.t_end() - 2.0).abs() < 1e-14);
        assert_eq!(g.index_of(1.0), Some(256));
        let mut q = ModelParams::benchmark();
        q.info_horizon = 1.05;
        assert!(simulation_grid(&q, 4096).is_err());
        let g = simulation_grid(&q, 4000).unwrap();
        assert_eq!(g.n_steps(), 4200);
        assert_eq!(g.index_of(1.0), Some(4000));
    }

    #[test]
    fn ordered_and_deterministic() {
        let out = map_paths(1000, |p| p * 2);
        assert!(out.iter().enumerate().all(|(i, &v)| v == 2 * i));
    }
}
