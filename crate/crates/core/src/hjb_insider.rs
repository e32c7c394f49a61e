//! Generator `A^u`, the pointwise HJB infimum and the affine closed-form
//! solutions of the two insider examples.
//!
//! Example 1 (`dX = rX dt + uσ dB`, cost `E[∫ a u² − b X_T]`):
//!
//! ```text
//! G(t, x) = −x b e^{−r(t−T)} + (b²/4a) ∫₀ᵗ σ² α² e^{−2r(s−T)} ds − ρ₀
//! u*      = α_t σ_t b e^{−r(t−T)} / (2a)
//! ```
//!
//! Example 2 (`dX = u dt + u dB`, same cost):
//!
//! ```text
//! G(t, x) = (b²/4a) ∫₀ᵗ (α + 1)² ds − b x − ρ₀
//! u*      = b (α_t + 1) / (2a)
//! ```
//!
//! In both cases `ρ₀` is the expectation of the full-horizon integral, so
//! that `E[g_T] = 0`, and `V(t, x) = E[G(t, x)]`.

use std::sync::Arc;

use crate::controlled_sde::ControlPolicy;
use crate::enlargement::{GaussianInformation, InfoDriftField};
use crate::error::{invalid, LabError, Result};
use crate::monte_carlo::{information_model, map_paths, path_field, InformationMode};
pub use crate::params::ModelParams;
use crate::paths::{cumulative_trapezoid, TimeGrid};
use crate::stats::EstimateWithError;

/// `A^u G = ∂_t G + ½ σ² ∂_xx G + (b + α σ) ∂_x G`, with `drift` and
/// `diffusion` the coefficients `b(t, x, u)` and `σ(t, x, u)`.
pub fn generator_au(gt: f64, gx: f64, gxx: f64, drift: f64, diffusion: f64, alpha: f64) -> f64 {
    gt + 0.5 * diffusion * diffusion * gxx + (drift + alpha * diffusion) * gx
}

/// `u* = α σ b e^{−r(t−T)} / (2a)`.
pub fn example1_control(alpha: f64, sigma: f64, t: f64, params: &ModelParams) -> f64 {
    alpha * sigma * params.b * (-params.r * (t - params.horizon)).exp() / (2.0 * params.a)
}

/// `u* = b (α + 1) / (2a)`.
pub fn example2_control(alpha: f64, params: &ModelParams) -> f64 {
    params.b * (alpha + 1.0) / (2.0 * params.a)
}

/// Example 1's optimal feedback, reading `α_t` from the observation.
pub fn example1_policy(params: &ModelParams) -> ControlPolicy {
    let p = params.clone();
    ControlPolicy::new("example1_optimal", move |obs| {
        example1_control(obs.drift, p.sigma.eval(obs.time), obs.time, &p)
    })
}

/// Example 2's optimal feedback.
pub fn example2_policy(params: &ModelParams) -> ControlPolicy {
    let p = params.clone();
    ControlPolicy::new("example2_optimal", move |obs| example2_control(obs.drift, &p))
}

/// Minimizes `½u²σ²G_xx + uασG_x + au² + (∂_tG + r x G_x)` over `u`.
///
/// Returns `(u_min, minimized value)`; fails unless `σ²G_xx + 2a > 0`.
#[allow(clippy::too_many_arguments)]
pub fn hjb_pointwise_infimum(
    gt: f64,
    gx: f64,
    gxx: f64,
    alpha: f64,
    sigma: f64,
    params: &ModelParams,
    x: f64,
    _t: f64,
) -> Result<(f64, f64)> {
    let curvature = sigma * sigma * gxx + 2.0 * params.a;
    if curvature.is_nan() || curvature <= 0.0 {
        return Err(LabError::NonConvex { curvature });
    }
    let u = -alpha * sigma * gx / curvature;
    let value = 0.5 * u * u * sigma * sigma * gxx + u * alpha * sigma * gx + params.a * u * u + gt + params.r * x * gx;
    Ok((u, value))
}

/// Which closed form an [`AffineValueField`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    One,
    Two,
}

/// `G(t, x) = f(t) x + g_t` along one path, on the `[0, T]` grid.
#[derive(Debug, Clone)]
pub struct AffineValueField {
    example: Example,
    params: ModelParams,
    grid: TimeGrid,
    drift: Vec<f64>,
    rate: Vec<f64>,
    integral: Vec<f64>,
    rho0: f64,
}

/// The Example 1 value field.
pub type ValueFieldExample1 = AffineValueField;

impl AffineValueField {
    pub fn example1(params: &ModelParams, field: &InfoDriftField, rho0: f64) -> Self {
        Self::build(Example::One, params, field, rho0)
    }

    pub fn example2(params: &ModelParams, field: &InfoDriftField, rho0: f64) -> Self {
        Self::build(Example::Two, params, field, rho0)
    }

    fn build(example: Example, params: &ModelParams, field: &InfoDriftField, rho0: f64) -> Self {
        let grid = field.control_grid();
        let drift = field.drift().to_vec();
        let rate: Vec<f64> = drift
            .iter()
            .enumerate()
            .map(|(i, &a)| running_rate(example, params, grid.time(i), a))
            .collect();
        let integral = cumulative_trapezoid(&rate, grid.dt());
        Self {
            example,
            params: params.clone(),
            grid,
            drift,
            rate,
            integral,
            rho0,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn drift(&self, i: usize) -> f64 {
        self.drift[i]
    }

    /// `f(t)`, the coefficient of `x`.
    pub fn slope(&self, t: f64) -> f64 {
        match self.example {
            Example::One => -self.params.b * (-self.params.r * (t - self.params.horizon)).exp(),
            Example::Two => -self.params.b,
        }
    }

    /// `f'(t)`.
    pub fn slope_rate(&self, t: f64) -> f64 {
        match self.example {
            Example::One => -self.params.r * self.slope(t),
            Example::Two => 0.0,
        }
    }

    /// `g_{t_i}`.
    pub fn g(&self, i: usize) -> f64 {
        self.integral[i] - self.rho0
    }

    /// `g'_{t_i}`.
    pub fn g_rate(&self, i: usize) -> f64 {
        self.rate[i]
    }

    pub fn value(&self, i: usize, x: f64) -> f64 {
        self.slope(self.grid.time(i)) * x + self.g(i)
    }

    /// `(∂_t G, ∂_x G, ∂_xx G)` at node `i`.
    pub fn derivatives(&self, i: usize, x: f64) -> (f64, f64, f64) {
        let t = self.grid.time(i);
        (self.slope_rate(t) * x + self.g_rate(i), self.slope(t), 0.0)
    }

    /// `∫_{t_i}^T g'`, trapezoid.
    pub fn remaining_integral(&self, i: usize) -> f64 {
        self.integral[self.integral.len() - 1] - self.integral[i]
    }

    /// The control minimizing the pointwise HJB expression at node `i`.
    pub fn optimal_control(&self, i: usize) -> f64 {
        let t = self.grid.time(i);
        match self.example {
            Example::One => example1_control(self.drift[i], self.params.sigma.eval(t), t, &self.params),
            Example::Two => example2_control(self.drift[i], &self.params),
        }
    }
}

/// `g'_t`: `(b²/4a) σ² α² e^{−2r(t−T)}` or `(b²/4a)(α + 1)²`.
fn running_rate(example: Example, params: &ModelParams, t: f64, alpha: f64) -> f64 {
    let k = params.b * params.b / (4.0 * params.a);
    match example {
        Example::One => {
            let s = params.sigma.eval(t);
            k * s * s * alpha * alpha * (-2.0 * params.r * (t - params.horizon)).exp()
        }
        Example::Two => k * (alpha + 1.0) * (alpha + 1.0),
    }
}

/// `G(t, x)` of Example 1 along `field`, for a node time `t`.
pub fn example1_g(params: &ModelParams, t: f64, x: f64, field: &InfoDriftField, rho0: f64) -> Result<f64> {
    let vf = AffineValueField::example1(params, field, rho0);
    let i = vf.grid.node(t, "t")?;
    Ok(vf.value(i, x))
}

/// `G(t, x)` of Example 2 along `field`.
pub fn example2_g(params: &ModelParams, t: f64, x: f64, field: &InfoDriftField, rho0: f64) -> Result<f64> {
    let vf = AffineValueField::example2(params, field, rho0);
    let i = vf.grid.node(t, "t")?;
    Ok(vf.value(i, x))
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(invalid(format!("n_paths must be at least 2, got {n_paths}")));
    }
    Ok(())
}

fn integral_samples(
    example: Example,
    params: &ModelParams,
    model: &Arc<GaussianInformation>,
    from: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    map_paths(n_paths, |p| {
        let field = path_field(model, InformationMode::Insider, seed, p)?;
        Ok(AffineValueField::build(example, params, &field, 0.0).remaining_integral(from))
    })
    .into_iter()
    .collect()
}

/// `ρ₀ = E[∫₀ᵀ g'_s ds]`, from a dedicated batch.
pub fn estimate_rho0(example: Example, params: &ModelParams, n_steps: usize, n_paths: usize, seed: u64) -> Result<EstimateWithError> {
    check_paths(n_paths)?;
    let model = information_model(params, n_steps)?;
    let samples = integral_samples(example, params, &model, 0, n_paths, seed)?;
    EstimateWithError::from_samples(&samples, seed)
}

fn value_mc(example: Example, params: &ModelParams, t: f64, x: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<EstimateWithError> {
    check_paths(n_paths)?;
    let model = information_model(params, n_steps)?;
    let grid = model.control_grid();
    let i = grid.node(t, "t")?;
    if i >= grid.n_steps() {
        return Err(invalid(format!("t = {t} must be before T = {}", params.horizon)));
    }
    let samples = integral_samples(example, params, &model, i, n_paths, seed)?;
    let deterministic = match example {
        Example::One => x * params.b * (-params.r * (t - params.horizon)).exp(),
        Example::Two => params.b * x,
    };
    let values: Vec<f64> = samples.iter().map(|s| -(deterministic + s)).collect();
    EstimateWithError::from_samples(&values, seed)
}

/// `V(t, x) = −E[x b e^{−r(t−T)} + (b²/4a) ∫ₜᵀ σ² α² e^{−2r(s−T)} ds]`.
pub fn example1_value(params: &ModelParams, t: f64, x: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<EstimateWithError> {
    value_mc(Example::One, params, t, x, n_steps, n_paths, seed)
}

/// `V(t, x) = −b x − (b²/4a) E[∫ₜᵀ (α + 1)² ds]`.
pub fn example2_value(params: &ModelParams, t: f64, x: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<EstimateWithError> {
    value_mc(Example::Two, params, t, x, n_steps, n_paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::TimeFunction;

    #[test]
    fn generator_cases() {
        assert_eq!(generator_au(0.0, 0.0, 0.0, 1.0, 2.0, 3.0), 0.0);
        // affine field, b = r x, σ(t, x, u) = u σ_t
        let (r, x, alpha, u, s) = (0.05, 2.0, 0.7, 1.3, 0.4);
        let got = generator_au(0.0, 1.0, 0.0, r * x, u * s, alpha);
        assert!((got - (r * x + alpha * u * s)).abs() < 1e-15);
    }

    #[test]
    fn example1_control_values() {
        let mut p = ModelParams::benchmark();
        assert_eq!(example1_control(0.0, 1.0, 0.3, &p), 0.0);
        assert_eq!(example1_control(1.0, 1.0, 1.0, &p), 0.5);
        p.r = 0.05;
        p.b = 2.0;
        let u = example1_control(2.0, 0.2, 0.0, &p);
        assert!((u - 0.42050843855040965).abs() < 1e-14, "{u}");
    }

    #[test]
    fn example2_control_values() {
        let mut p = ModelParams::benchmark();
        assert_eq!(example2_control(0.0, &p), 0.5);
        assert_eq!(example2_control(-1.0, &p), 0.0);
        p.a = 2.0;
        p.b = 3.0;
        assert_eq!(example2_control(1.0, &p), 1.5);
    }

    #[test]
    fn infimum_cases() {
        let p = ModelParams::benchmark();
        let (u, _) = hjb_pointwise_infimum(0.3, 0.0, 0.0, 1.2, 0.5, &p, 1.0, 0.0).unwrap();
        assert_eq!(u, 0.0);
        let err = hjb_pointwise_infimum(0.0, 1.0, -10.0, 1.0, 1.0, &p, 0.0, 0.0).unwrap_err();
        assert!(matches!(err, LabError::NonConvex { .. }));
    }

    fn informed_field(params: &ModelParams, n_steps: usize, seed: u64, p: usize) -> InfoDriftField {
        let model = information_model(params, n_steps).unwrap();
        path_field(&model, InformationMode::Insider, seed, p).unwrap()
    }

    #[test]
    fn example1_field_satisfies_hjb_and_odes() {
        let mut p = ModelParams::benchmark();
        p.r = 0.05;
        p.b = 2.0;
        p.a = 0.7;
        p.sigma = TimeFunction::new(|t| 1.0 + 0.5 * t.sin());
        let field = informed_field(&p, 200, 3, 0);
        let vf = AffineValueField::example1(&p, &field, 0.4);
        let dt = vf.grid().dt();
        for i in 0..=200 {
            let t = vf.grid().time(i);
            for x in [-3.0, 0.0, 2.5] {
                let (gt, gx, gxx) = vf.derivatives(i, x);
                let s = p.sigma.eval(t);
                let (u, value) = hjb_pointwise_infimum(gt, gx, gxx, vf.drift(i), s, &p, x, t).unwrap();
                assert!(value.abs() < 1e-10, "residual {value} at {i}");
                let closed = vf.optimal_control(i);
                assert!((u - closed).abs() <= 1e-12 * closed.abs().max(1e-300));
            }
            if i > 0 && i < 200 {
                let fd = (vf.slope(t + dt) - vf.slope(t - dt)) / (2.0 * dt);
                assert!((fd + p.r * vf.slope(t)).abs() < 1e-6);
                let step = 4.0 * p.a * (vf.g(i + 1) - vf.g(i)) / dt;
                let f2 = |j: usize| {
                    let tj = vf.grid().time(j);
                    vf.drift(j).powi(2) * p.sigma.eval(tj).powi(2) * vf.slope(tj).powi(2)
                };
                assert!((step - 0.5 * (f2(i) + f2(i + 1))).abs() < 1e-9 * (1.0 + step.abs()));
            }
        }
        assert_eq!(vf.slope(p.horizon), -p.b);
        assert!((vf.g(0) + 0.4).abs() < 1e-15);
    }

    #[test]
    fn example2_field_satisfies_hjb() {
        let p = ModelParams::benchmark();
        let field = informed_field(&p, 100, 4, 1);
        let vf = AffineValueField::example2(&p, &field, 0.0);
        for i in 0..=100 {
            let (gt, gx, gxx) = vf.derivatives(i, 1.7);
            let u = vf.optimal_control(i);
            // b(t,x,u) = u, σ(t,x,u) = u
            let residual = generator_au(gt, gx, gxx, u, u, vf.drift(i)) + p.a * u * u;
            assert!(residual.abs() < 1e-10);
            // any other control does worse
            let worse = generator_au(gt, gx, gxx, u + 0.1, u + 0.1, vf.drift(i)) + p.a * (u + 0.1).powi(2);
            assert!(worse > residual);
        }
    }

    #[test]
    fn no_drift_value_field() {
        let p = ModelParams::benchmark();
        let model = information_model(&p, 50).unwrap();
        let field = path_field(&model, InformationMode::Uninformed, 1, 0).unwrap();
        let g = example1_g(&p, 0.5, 2.0, &field, 0.0).unwrap();
        assert_eq!(g, -2.0);
        let g2 = example2_g(&p, 1.0, 0.0, &field, 0.25).unwrap();
        // (b²/4a) ∫₀¹ 1 ds − ρ₀
        assert!((g2 - 0.0).abs() < 1e-14);
    }

    #[test]
    fn value_requires_paths() {
        let p = ModelParams::benchmark();
        assert!(example1_value(&p, 0.0, 0.0, 16, 0, 1).is_err());
        assert!(example2_value(&p, 1.0, 0.0, 16, 10, 1).is_err());
    }

    #[test]
    fn deterministic_part_of_value() {
        // with x = 1, b = 1, r = 0 the deterministic term is exactly 1
        let p = ModelParams::benchmark();
        let v = example1_value(&p, 0.0, 1.0, 16, 50, 2).unwrap();
        let w = example1_value(&p, 0.0, 0.0, 16, 50, 2).unwrap();
        assert!((v.mean - (w.mean - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn tiny_terminal_weight_kills_value() {
        let mut p = ModelParams::benchmark();
        p.b = 1e-9;
        let v = example1_value(&p, 0.0, 0.0, 32, 100, 5).unwrap();
        assert!(v.mean.abs() < 1e-17);
        let w = example2_value(&p, 0.0, 0.0, 32, 100, 5).unwrap();
        assert!(w.mean.abs() < 1e-17);
    }
}
