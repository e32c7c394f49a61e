//! Monte Carlo cost estimates and the first-order optimality checks built
//! on them: perturbation sweeps, directional derivatives, the martingale
//! test for `N_u` and the recovery of `B` from the integrated noise.

mod martingale;
mod perturbation;
mod recovery;
mod test_functions;

use std::sync::Arc;

use serde::Serialize;

pub use martingale::{martingale_diagnostic, nu_path, MartingaleCell, NuPath};
pub use perturbation::{
    default_amplitudes, directional_derivative, perturbation_sweep, state_sensitivity, PerturbationSpec, SweepRow,
    SweepTable,
};
pub use recovery::{
    discounted_noise, discounted_noise_trapezoid, recovery_constant, semimartingale_recovery, IntegratedNoise,
};
pub use test_functions::{test_dictionary, TestFunction};

use crate::controlled_sde::{exit_index, simulate_forward, simulate_insider, CoefficientSpec, ControlPolicy, Domain, Observation, StatePath};
use crate::enlargement::{decompose, GaussianInformation, InfoDriftField};
use crate::error::{invalid, LabError, Result};
use crate::monte_carlo::{information_model, map_paths, path_field, InformationMode};
use crate::params::{CostFunctional, Dynamics, ModelParams};
use crate::stats::EstimateWithError;

/// Share of diverged paths above which an estimate is refused.
pub const MAX_DIVERGED_FRACTION: f64 = 1e-3;

/// Which of the two equivalent state equations drives the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// `dX = b dt + σ dB`.
    Forward,
    /// `dX = (b + σα) dt + σ dB̃`.
    Insider,
}

/// Everything needed to simulate and price one controlled path.
#[derive(Debug, Clone)]
pub struct Scenario {
    params: ModelParams,
    dynamics: Dynamics,
    cost: CostFunctional,
    information: InformationMode,
    domain: Domain,
    route: Route,
    model: Arc<GaussianInformation>,
    coeffs: CoefficientSpec,
}

impl Scenario {
    /// Insider information, the whole real line and the forward route.
    pub fn new(params: ModelParams, dynamics: Dynamics, cost: CostFunctional, n_steps: usize) -> Result<Self> {
        let model = information_model(&params, n_steps)?;
        let coeffs = dynamics.coefficients(&params);
        Ok(Self {
            params,
            dynamics,
            cost,
            information: InformationMode::Insider,
            domain: Domain::real_line(),
            route: Route::Forward,
            model,
            coeffs,
        })
    }

    pub fn with_information(mut self, mode: InformationMode) -> Self {
        self.information = mode;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    pub fn cost(&self) -> &CostFunctional {
        &self.cost
    }

    pub fn information(&self) -> InformationMode {
        self.information
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn model(&self) -> &Arc<GaussianInformation> {
        &self.model
    }

    pub fn coefficients(&self) -> &CoefficientSpec {
        &self.coeffs
    }

    pub fn n_steps(&self) -> usize {
        self.model.horizon_index()
    }

    /// Field of path `p` of batch `seed`.
    pub fn field(&self, seed: u64, p: usize) -> Result<InfoDriftField> {
        path_field(&self.model, self.information, seed, p)
    }

    /// Simulates `policy` from `(t0, x0)` along `field`.
    pub fn simulate(&self, policy: &ControlPolicy, field: &InfoDriftField) -> Result<StatePath> {
        let (x0, t0) = (self.params.x0, self.params.t0);
        match self.route {
            Route::Forward => simulate_forward(&self.coeffs, policy, field, x0, t0),
            Route::Insider => {
                let bt = decompose(field.path(), field)?;
                simulate_insider(&self.coeffs, policy, field, &bt, x0, t0)
            }
        }
    }

    /// `Σ_{k<τ} L(t_k, X_k, u_k) dt + ψ(τ, X_τ)` with `τ` the first exit
    /// node, or `T`.
    pub fn path_cost(&self, path: &StatePath) -> f64 {
        let grid = path.grid();
        let dt = grid.dt();
        let stop = exit_index(path, &self.domain).unwrap_or(grid.n_steps());
        let (x, u) = (path.values(), path.controls());
        let mut running = 0.0;
        for k in 0..stop {
            running += self.cost.running(&self.params, grid.time(k), x[k], u[k]) * dt;
        }
        running + self.cost.terminal(&self.params, grid.time(stop), x[stop])
    }

    /// The observation available at global node `index` of `state`.
    pub(crate) fn observe<'a>(&self, field: &'a InfoDriftField, state: &StatePath, index: usize) -> Observation<'a> {
        Observation {
            index,
            time: field.control_grid().time(index),
            state: state.values()[index - state.start_index()],
            info: field.info(),
            history: &field.path().values()[..=index],
            drift: field.drift()[index],
        }
    }

    /// `(running weight a, terminal weight w_T)` of a quadratic cost with
    /// linear terminal part.
    pub(crate) fn linear_quadratic_weights(&self) -> Result<(f64, f64)> {
        match self.cost.terminal_weight(&self.params, self.params.horizon) {
            Some(w) if self.cost.is_quadratic() => {
                if !self.domain.is_real_line() {
                    return Err(invalid("the first-order identities need the domain to be the whole real line"));
                }
                Ok((self.params.a, w))
            }
            _ => Err(invalid("the first-order identities need L = a u² and a linear terminal cost")),
        }
    }
}

/// A cost estimate over the paths that stayed finite.
#[derive(Debug, Clone, Serialize)]
pub struct CostEstimate {
    pub estimate: EstimateWithError,
    /// Indices of paths whose state became non-finite.
    pub diverged: Vec<usize>,
}

/// Splits per-path results into finite samples and diverged path indices.
pub(crate) fn collect_samples<T>(results: Vec<Result<T>>) -> Result<(Vec<T>, Vec<usize>)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut diverged = Vec::new();
    for (p, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(LabError::Diverged { .. }) => diverged.push(p),
            Err(e) => return Err(e),
        }
    }
    if diverged.len() as f64 > MAX_DIVERGED_FRACTION * total as f64 {
        return Err(LabError::TooManyDiverged {
            diverged: diverged.len(),
            total,
        });
    }
    Ok((ok, diverged))
}

pub(crate) fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(invalid(format!("n_paths must be at least 2, got {n_paths}")));
    }
    Ok(())
}

/// `Ĵ(u) = mean over paths of the path cost`.
pub fn cost_mc(policy: &ControlPolicy, scenario: &Scenario, n_paths: usize, seed: u64) -> Result<CostEstimate> {
    check_paths(n_paths)?;
    let results = map_paths(n_paths, |p| {
        let field = scenario.field(seed, p)?;
        let path = scenario.simulate(policy, &field)?;
        Ok(scenario.path_cost(&path))
    });
    let (samples, diverged) = collect_samples(results)?;
    Ok(CostEstimate {
        estimate: EstimateWithError::from_samples(&samples, seed)?,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb_insider::example1_policy;

    #[test]
    fn rejects_few_paths() {
        let s = Scenario::new(ModelParams::benchmark(), Dynamics::Wealth, CostFunctional::Terminal, 16).unwrap();
        assert!(cost_mc(&ControlPolicy::zero(), &s, 1, 0).is_err());
    }

    #[test]
    fn zero_control_costs_nothing() {
        let s = Scenario::new(ModelParams::benchmark(), Dynamics::Wealth, CostFunctional::Terminal, 16).unwrap();
        let c = cost_mc(&ControlPolicy::zero(), &s, 10, 0).unwrap();
        assert_eq!(c.estimate.mean, 0.0);
        assert!(c.diverged.is_empty());
    }

    #[test]
    fn routes_agree() {
        let p = ModelParams::benchmark();
        let s = Scenario::new(p.clone(), Dynamics::Wealth, CostFunctional::Terminal, 64).unwrap();
        let pol = example1_policy(&p);
        let a = cost_mc(&pol, &s, 50, 3).unwrap().estimate.mean;
        let b = cost_mc(&pol, &s.clone().with_route(Route::Insider), 50, 3).unwrap().estimate.mean;
        assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn divergence_is_reported() {
        let s = Scenario::new(ModelParams::benchmark(), Dynamics::UnitDrift, CostFunctional::Terminal, 8).unwrap();
        let blowup = ControlPolicy::new("blowup", |obs| if obs.index == 3 { f64::INFINITY } else { 0.0 });
        let err = cost_mc(&blowup, &s, 10, 0).unwrap_err();
        assert_eq!(err, LabError::TooManyDiverged { diverged: 10, total: 10 });
    }

    #[test]
    fn exit_stops_the_cost() {
        let p = ModelParams::benchmark();
        let s = Scenario::new(p, Dynamics::UnitDrift, CostFunctional::Terminal, 10)
            .unwrap()
            .with_domain(Domain::new(-1e-9, 1e9).unwrap());
        // u ≡ 1 on a path; the state leaves (−1e-9, ∞) once X <= −1e-9
        let field = s.field(0, 0).unwrap();
        let path = s.simulate(&ControlPolicy::constant(1.0), &field).unwrap();
        let cost = s.path_cost(&path);
        match exit_index(&path, s.domain()) {
            Some(k) => {
                let expect = k as f64 * 0.1 - path.values()[k];
                assert!((cost - expect).abs() < 1e-12);
            }
            None => assert!((cost - (1.0 - path.terminal())).abs() < 1e-12),
        }
    }
}
