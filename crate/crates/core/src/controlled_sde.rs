//! Euler–Maruyama simulation of the controlled state equation in its two
//! equivalent forms:
//!
//! * driven by `B` with an enlarged-filtration control,
//!   `dX = b dt + σ dB`;
//! * driven by the enlarged-filtration Brownian motion `B̃` with the drift
//!   correction, `dX = (b + σα) dt + σ dB̃`.
//!
//! Coefficients are evaluated at the left node of each step.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::enlargement::InfoDriftField;
use crate::error::{invalid, LabError, Result};
use crate::params::ModelParams;
use crate::paths::{path_rng, BrownianPath, TimeGrid, Window};

pub type CoefFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Drift `b(t, x, u)` and diffusion `σ(t, x, u)` of the state equation.
#[derive(Clone)]
pub struct CoefficientSpec {
    drift: CoefFn,
    diffusion: CoefFn,
    growth: f64,
}

impl CoefficientSpec {
    /// `growth` is the constant `C` of `|b| + |σ| <= C(1 + |x| + |u|)`.
    pub fn new(
        drift: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        growth: f64,
    ) -> Self {
        Self {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            growth,
        }
    }

    pub fn drift(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.drift)(t, x, u)
    }

    pub fn diffusion(&self, t: f64, x: f64, u: f64) -> f64 {
        (self.diffusion)(t, x, u)
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth
    }

    /// Spot-checks the linear growth bound at `probes` random points of
    /// `[t0, t1] × [−R, R]²`.
    pub fn check_growth(&self, t0: f64, t1: f64, radius: f64, probes: usize, seed: u64) -> Result<()> {
        let mut rng = path_rng(seed, u64::MAX);
        for _ in 0..probes {
            let t = rng.random_range(t0..=t1);
            let x = rng.random_range(-radius..=radius);
            let u = rng.random_range(-radius..=radius);
            let lhs = self.drift(t, x, u).abs() + self.diffusion(t, x, u).abs();
            let rhs = self.growth * (1.0 + x.abs() + u.abs());
            if lhs.is_nan() || lhs > rhs * (1.0 + 1e-12) {
                return Err(invalid(format!(
                    "growth bound violated at (t, x, u) = ({t}, {x}, {u}): {lhs} > {rhs}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for CoefficientSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSpec")
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

/// What a control may look at when choosing `u_{t_i}`: the node, the
/// current state, the anticipated value `L`, the Brownian history up to
/// `t_i` and the information drift at `t_i` (itself a function of the
/// history and `L`).
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub index: usize,
    pub time: f64,
    pub state: f64,
    pub info: f64,
    /// `B_{t_0}, …, B_{t_i}`.
    pub history: &'a [f64],
    pub drift: f64,
}

impl Observation<'_> {
    /// `B_{t_i}`.
    pub fn brownian(&self) -> f64 {
        self.history[self.history.len() - 1]
    }
}

pub type ControlRule = Arc<dyn Fn(&Observation<'_>) -> f64 + Send + Sync>;

/// A feedback rule producing the control at each node.
#[derive(Clone)]
pub struct ControlPolicy {
    name: String,
    rule: ControlRule,
    bounded_moments: bool,
}

impl ControlPolicy {
    pub fn new(name: impl Into<String>, rule: impl Fn(&Observation<'_>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            rule: Arc::new(rule),
            bounded_moments: true,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), move |_| c)
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0)
    }

    /// Flags whether all polynomial moments of the control are known to be finite.
    pub fn with_moment_bound(mut self, bounded: bool) -> Self {
        self.bounded_moments = bounded;
        self
    }

    pub fn has_moment_bound(&self) -> bool {
        self.bounded_moments
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn control(&self, obs: &Observation<'_>) -> f64 {
        (self.rule)(obs)
    }

    /// `u + shift` on the steps of `window`.
    pub fn shifted(&self, window_steps: std::ops::Range<usize>, shift: f64) -> Self {
        let base = Arc::clone(&self.rule);
        Self {
            name: format!("{}+{shift}χ", self.name),
            rule: Arc::new(move |obs| {
                let u = base(obs);
                if window_steps.contains(&obs.index) {
                    u + shift
                } else {
                    u
                }
            }),
            bounded_moments: self.bounded_moments,
        }
    }
}

impl fmt::Debug for ControlPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlPolicy")
            .field("name", &self.name)
            .field("bounded_moments", &self.bounded_moments)
            .finish()
    }
}

/// Open interval `(lo, hi)`; infinite endpoints allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(invalid(format!("domain ({lo}, {hi}) is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn is_real_line(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }
}

/// A simulated state trajectory on `[t₀, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    grid: TimeGrid,
    start_index: usize,
    values: Vec<f64>,
    controls: Vec<f64>,
    exit_index: Option<usize>,
}

impl StatePath {
    pub fn from_values(grid: TimeGrid, start_index: usize, values: Vec<f64>, controls: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || controls.len() != grid.n_steps() {
            return Err(invalid("state path lengths do not match its grid"));
        }
        Ok(Self {
            grid,
            start_index,
            values,
            controls,
            exit_index: None,
        })
    }

    /// Grid on `[t₀, T]`.
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Node index of `t₀` on the `[0, T]` control grid.
    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Control applied on each step, `controls[k]` on `[t_k, t_{k+1})`.
    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Local node index of the first exit, once [`mark_exit`](Self::mark_exit) ran.
    pub fn exit_index(&self) -> Option<usize> {
        self.exit_index
    }

    /// Records the first exit from `domain` and returns the exit time.
    pub fn mark_exit(&mut self, domain: &Domain) -> f64 {
        self.exit_index = exit_index(self, domain);
        first_exit(self, domain)
    }
}

enum Driver<'a> {
    Forward,
    Insider(&'a BrownianPath),
}

fn euler(
    coeffs: &CoefficientSpec,
    field: &InfoDriftField,
    driver: Driver<'_>,
    x0: f64,
    t0: f64,
    mut control: impl FnMut(&Observation<'_>) -> f64,
) -> Result<StatePath> {
    if !x0.is_finite() {
        return Err(invalid("initial state must be finite"));
    }
    let control_grid = field.control_grid();
    let i0 = control_grid.node(t0, "t0")?;
    let grid = control_grid.tail_from(i0)?;
    let dt = grid.dt();
    let b = field.path().values();
    let alpha = field.drift();
    let n = control_grid.n_steps();

    let mut values = Vec::with_capacity(n - i0 + 1);
    let mut controls = Vec::with_capacity(n - i0);
    let mut x = x0;
    values.push(x);
    for i in i0..n {
        let t = control_grid.time(i);
        let obs = Observation {
            index: i,
            time: t,
            state: x,
            info: field.info(),
            history: &b[..=i],
            drift: alpha[i],
        };
        let u = control(&obs);
        let mu = coeffs.drift(t, x, u);
        let sig = coeffs.diffusion(t, x, u);
        x = match driver {
            Driver::Forward => x + mu * dt + sig * (b[i + 1] - b[i]),
            Driver::Insider(bt) => x + (mu + sig * alpha[i]) * dt + sig * (bt.at(i + 1) - bt.at(i)),
        };
        if !x.is_finite() {
            return Err(LabError::Diverged {
                path: None,
                step: i + 1,
            });
        }
        values.push(x);
        controls.push(u);
    }
    StatePath::from_values(grid, i0, values, controls)
}

/// `X_{i+1} = X_i + (b_i + σ_i α_i) dt + σ_i ΔB̃_i`.
pub fn simulate_insider(
    coeffs: &CoefficientSpec,
    policy: &ControlPolicy,
    field: &InfoDriftField,
    btilde: &BrownianPath,
    x0: f64,
    t0: f64,
) -> Result<StatePath> {
    if !btilde.grid().matches(&field.control_grid()) {
        return Err(invalid("B̃ must live on the [0, T] grid of the drift field"));
    }
    euler(coeffs, field, Driver::Insider(btilde), x0, t0, |obs| policy.control(obs))
}

/// `X_{i+1} = X_i + b_i dt + σ_i ΔB_i`, with `B` the path of `field`.
pub fn simulate_forward(
    coeffs: &CoefficientSpec,
    policy: &ControlPolicy,
    field: &InfoDriftField,
    x0: f64,
    t0: f64,
) -> Result<StatePath> {
    euler(coeffs, field, Driver::Forward, x0, t0, |obs| policy.control(obs))
}

/// [`simulate_forward`] with a stateful control closure.
pub fn simulate_forward_with(
    coeffs: &CoefficientSpec,
    field: &InfoDriftField,
    x0: f64,
    t0: f64,
    control: impl FnMut(&Observation<'_>) -> f64,
) -> Result<StatePath> {
    euler(coeffs, field, Driver::Forward, x0, t0, control)
}

/// Local index of the first node outside `domain`.
pub fn exit_index(path: &StatePath, domain: &Domain) -> Option<usize> {
    if domain.is_real_line() {
        return None;
    }
    path.values.iter().position(|&x| !domain.contains(x))
}

/// `τ = inf{s : X_s ∉ 𝒪}` on the nodes, or `T` if the path stays inside.
pub fn first_exit(path: &StatePath, domain: &Domain) -> f64 {
    match exit_index(path, domain) {
        Some(k) => path.grid.time(k),
        None => path.grid.t_end(),
    }
}

/// Terminal wealth `X_T(θ; 0)` of the indicator control `θ₀ χ_{(t, t+h]}`
/// started from zero wealth:
///
/// ```text
/// X_T = e^{b_T} Σ_{steps in window} e^{−b_{t_i}} θ₀ [(r̃ − r) dt + σ_{t_i} ΔB_i]
/// ```
///
/// `b` is a path on a grid starting at 0 that covers the window.
pub fn wealth_step_closed_form(params: &ModelParams, theta0: f64, window: Window, b: &BrownianPath) -> Result<f64> {
    if window.start < params.t0 || window.end > params.horizon + 1e-12 {
        return Err(invalid(format!(
            "window ({}, {}] is outside the horizon [{}, {}]",
            window.start, window.end, params.t0, params.horizon
        )));
    }
    let grid = b.grid();
    let steps = window.step_range(grid)?;
    let excess = params.r_tilde - params.r;
    let dt = grid.dt();
    let mut acc = 0.0;
    for i in steps {
        let t = grid.time(i);
        acc += params.discount(t) * theta0 * (excess * dt + params.sigma.eval(t) * b.increment(i));
    }
    Ok(acc / params.discount(params.horizon))
}

/// `Σ_k |u_k|^p dt`, the discrete `∫ |u|^p ds`.
pub fn control_moment(path: &StatePath, p: i32) -> f64 {
    let dt = path.grid.dt();
    path.controls.iter().map(|u| u.abs().powi(p) * dt).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enlargement::{decompose, GaussianInformation};
    use crate::params::Dynamics;
    use crate::paths::{make_grid, sample_brownian, TimeFunction};

    fn unit_model(n: usize) -> Arc<GaussianInformation> {
        let grid = make_grid(0.0, 2.0, 2 * n).unwrap();
        Arc::new(GaussianInformation::new(TimeFunction::constant(1.0), grid, 1.0).unwrap())
    }

    #[test]
    fn frozen_dynamics() {
        let model = unit_model(32);
        let field = model.field(sample_brownian(model.full_grid(), 1)).unwrap();
        let c = CoefficientSpec::new(|_, _, _| 0.0, |_, _, _| 0.0, 1.0);
        let bt = decompose(field.path(), &field).unwrap();
        let p = simulate_insider(&c, &ControlPolicy::constant(3.0), &field, &bt, 1.5, 0.0).unwrap();
        assert!(p.values().iter().all(|&x| x == 1.5));
    }

    #[test]
    fn deterministic_growth_matches_exponential() {
        let model = unit_model(1000);
        let field = model.field(sample_brownian(model.full_grid(), 2)).unwrap();
        let mut params = ModelParams::benchmark();
        params.r = 0.05;
        let c = Dynamics::Wealth.coefficients(&params);
        let p = simulate_forward(&c, &ControlPolicy::zero(), &field, 2.0, 0.0).unwrap();
        let dt = p.grid().dt();
        let exact = 2.0 * (0.05f64 * 1.0).exp();
        let rel = (p.terminal() - exact).abs() / exact;
        assert!(rel <= 0.05 * 0.05 * 1.0 * dt, "{rel}");
    }

    #[test]
    fn unit_control_telescopes() {
        let model = unit_model(64);
        let field = model.uninformed(sample_brownian(model.full_grid(), 3)).unwrap();
        let c = Dynamics::UnitDrift.coefficients(&ModelParams::benchmark());
        let p = simulate_forward(&c, &ControlPolicy::constant(1.0), &field, 0.5, 0.0).unwrap();
        let bt = field.path().at(64);
        assert!((p.terminal() - (0.5 + 1.0 + bt)).abs() < 1e-12);
    }

    #[test]
    fn routes_agree_bitwise_without_drift() {
        let model = unit_model(64);
        let field = model.uninformed(sample_brownian(model.full_grid(), 4)).unwrap();
        let bt = decompose(field.path(), &field).unwrap();
        let c = Dynamics::Wealth.coefficients(&ModelParams::benchmark());
        let pol = ControlPolicy::new("b", |o| o.brownian().sin());
        let a = simulate_forward(&c, &pol, &field, 0.0, 0.0).unwrap();
        let b = simulate_insider(&c, &pol, &field, &bt, 0.0, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn initial_condition_and_start_node() {
        let model = unit_model(40);
        let field = model.field(sample_brownian(model.full_grid(), 5)).unwrap();
        let c = Dynamics::Wealth.coefficients(&ModelParams::benchmark());
        let p = simulate_forward(&c, &ControlPolicy::constant(1.0), &field, 0.123, 0.25).unwrap();
        assert_eq!(p.values()[0], 0.123);
        assert_eq!(p.start_index(), 10);
        assert_eq!(p.grid().n_steps(), 30);
        assert!(simulate_forward(&c, &ControlPolicy::zero(), &field, 0.0, 0.2501).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let model = unit_model(16);
        let field = model.field(sample_brownian(model.full_grid(), 6)).unwrap();
        let c = CoefficientSpec::new(|_, x, _| 1e300 * (1.0 + x.abs()), |_, _, _| 0.0, 1.0);
        let err = simulate_forward(&c, &ControlPolicy::zero(), &field, 1.0, 0.0).unwrap_err();
        assert!(matches!(err, LabError::Diverged { step, .. } if step >= 1));
    }

    #[test]
    fn exits() {
        let grid = make_grid(0.0, 1.0, 3).unwrap();
        let ramp = StatePath::from_values(grid, 0, grid.times(), vec![0.0; 3]).unwrap();
        let half = Domain::new(f64::NEG_INFINITY, 0.5).unwrap();
        assert!((first_exit(&ramp, &half) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(first_exit(&ramp, &Domain::real_line()), 1.0);
        let flat = StatePath::from_values(grid, 0, vec![0.0; 4], vec![0.0; 3]).unwrap();
        assert_eq!(first_exit(&flat, &Domain::new(-1.0, 1.0).unwrap()), 1.0);
        // an open set excludes its boundary
        let g10 = make_grid(0.0, 1.0, 10).unwrap();
        let mut ramp10 = StatePath::from_values(g10, 0, g10.times(), vec![0.0; 10]).unwrap();
        assert!((ramp10.mark_exit(&half) - 0.5).abs() < 1e-15);
        assert_eq!(ramp10.exit_index(), Some(5));
        assert!(Domain::new(1.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_special_cases() {
        let params = ModelParams::benchmark();
        let b = sample_brownian(&make_grid(0.0, 1.0, 100).unwrap(), 7);
        let w = Window::new(0.3, 0.6).unwrap();
        assert_eq!(wealth_step_closed_form(&params, 0.0, w, &b).unwrap(), 0.0);
        let x = wealth_step_closed_form(&params, 2.0, w, &b).unwrap();
        assert!((x - 2.0 * (b.at(60) - b.at(30))).abs() < 1e-12);
        assert!(wealth_step_closed_form(&params, 1.0, Window::new(0.5, 1.5).unwrap(), &b).is_err());
    }

    #[test]
    fn growth_check() {
        let c = Dynamics::Wealth.coefficients(&ModelParams::benchmark());
        c.check_growth(0.0, 1.0, 100.0, 1000, 1).unwrap();
        let bad = CoefficientSpec::new(|_, x, _| x * x, |_, _, _| 0.0, 1.0);
        assert!(bad.check_growth(0.0, 1.0, 100.0, 1000, 1).is_err());
    }
}
