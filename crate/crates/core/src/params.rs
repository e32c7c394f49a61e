//! Model coefficients shared by the wealth examples, the HJB solutions and
//! the optimality experiments.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controlled_sde::CoefficientSpec;
use crate::error::{invalid, Result};
use crate::paths::{TimeFunction, TimeGrid, WeightFunction};

/// Coefficients `(r, r̃, σ, a, b, T, T₁, m)` plus the initial condition.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Bond rate `r`.
    pub r: f64,
    /// Stock rate `r̃`.
    pub r_tilde: f64,
    /// Volatility `σ_t`.
    pub sigma: TimeFunction,
    /// Running cost weight `a > 0`.
    pub a: f64,
    /// Terminal weight `b > 0`.
    pub b: f64,
    /// Control horizon `T`.
    pub horizon: f64,
    /// Information horizon `T₁ > T`.
    pub info_horizon: f64,
    /// Weight of `L = ∫₀^{T₁} m dB`.
    pub weight: WeightFunction,
    pub x0: f64,
    pub t0: f64,
}

impl ModelParams {
    /// `m ≡ 1, T = 1, T₁ = 2, r = r̃ = 0, σ ≡ 1, a = b = 1, x0 = 0, t0 = 0`.
    pub fn benchmark() -> Self {
        Self {
            r: 0.0,
            r_tilde: 0.0,
            sigma: TimeFunction::constant(1.0),
            a: 1.0,
            b: 1.0,
            horizon: 1.0,
            info_horizon: 2.0,
            weight: TimeFunction::constant(1.0),
            x0: 0.0,
            t0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("r", self.r),
            ("r_tilde", self.r_tilde),
            ("a", self.a),
            ("b", self.b),
            ("horizon", self.horizon),
            ("info_horizon", self.info_horizon),
            ("x0", self.x0),
            ("t0", self.t0),
        ];
        if let Some((name, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("{name} must be finite, got {v}")));
        }
        if self.a <= 0.0 {
            return Err(invalid(format!("a must be positive, got {}", self.a)));
        }
        if self.b <= 0.0 {
            return Err(invalid(format!("b must be positive, got {}", self.b)));
        }
        if self.horizon <= 0.0 {
            return Err(invalid(format!("horizon T must be positive, got {}", self.horizon)));
        }
        if self.info_horizon <= self.horizon {
            return Err(invalid(format!(
                "T < T1 is required, got T = {} and T1 = {}",
                self.horizon, self.info_horizon
            )));
        }
        if self.t0 < 0.0 || self.t0 >= self.horizon {
            return Err(invalid(format!(
                "t0 must lie in [0, T), got t0 = {} with T = {}",
                self.t0, self.horizon
            )));
        }
        Ok(())
    }

    /// Checks `σ` is finite and non-zero at every node of `grid`.
    pub fn validate_sigma(&self, grid: &TimeGrid) -> Result<()> {
        for i in 0..grid.len() {
            let s = self.sigma.eval(grid.time(i));
            if !s.is_finite() || s == 0.0 {
                return Err(invalid(format!(
                    "sigma must be finite and non-zero, got {s} at t = {}",
                    grid.time(i)
                )));
            }
        }
        Ok(())
    }

    /// `e^{−b_t}` with `b_t = ∫₀ᵗ r ds = r·t`.
    pub fn discount(&self, t: f64) -> f64 {
        (-self.r * t).exp()
    }
}

/// Which controlled state equation is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// `dX = (rX + (r̃ − r)u) dt + uσ_t dB`.
    Wealth,
    /// `dX = u dt + u dB`.
    UnitDrift,
}

impl Dynamics {
    pub fn coefficients(&self, params: &ModelParams) -> CoefficientSpec {
        match self {
            Dynamics::Wealth => {
                let (r, excess) = (params.r, params.r_tilde - params.r);
                let sigma = params.sigma.clone();
                let sigma_sup = params
                    .sigma
                    .profile()
                    .map_or(1.0, |p| p.sup_abs(0.0, params.horizon));
                let bound = r.abs() + excess.abs() + sigma_sup;
                CoefficientSpec::new(
                    move |_t, x, u| r * x + excess * u,
                    move |t, _x, u| u * sigma.eval(t),
                    bound,
                )
            }
            Dynamics::UnitDrift => CoefficientSpec::new(|_t, _x, u| u, |_t, _x, u| u, 1.0),
        }
    }

    /// `∂b/∂u` for these control-affine dynamics.
    pub fn drift_sensitivity(&self, params: &ModelParams, _t: f64) -> f64 {
        match self {
            Dynamics::Wealth => params.r_tilde - params.r,
            Dynamics::UnitDrift => 1.0,
        }
    }

    /// `∂σ/∂u`.
    pub fn diffusion_sensitivity(&self, params: &ModelParams, t: f64) -> f64 {
        match self {
            Dynamics::Wealth => params.sigma.eval(t),
            Dynamics::UnitDrift => 1.0,
        }
    }

    /// Linear growth rate of the state, `∂b/∂x`.
    pub fn state_rate(&self, params: &ModelParams) -> f64 {
        match self {
            Dynamics::Wealth => params.r,
            Dynamics::UnitDrift => 0.0,
        }
    }
}

pub type RunningCost = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type TerminalCost = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The cost `J(t, x; u) = E[∫_t^τ L(s, X_s, u_s) ds + ψ(τ, X_τ)]`.
#[derive(Clone)]
pub enum CostFunctional {
    /// `L = a u²`, `ψ = −b x`.
    Terminal,
    /// `L = a u²`, `ψ(t, x) = −e^{−∫₀ᵗ r} x`.
    Discounted,
    General {
        running: RunningCost,
        terminal: TerminalCost,
    },
}

impl CostFunctional {
    pub fn running(&self, params: &ModelParams, t: f64, x: f64, u: f64) -> f64 {
        match self {
            CostFunctional::Terminal | CostFunctional::Discounted => params.a * u * u,
            CostFunctional::General { running, .. } => running(t, x, u),
        }
    }

    pub fn terminal(&self, params: &ModelParams, t: f64, x: f64) -> f64 {
        match self {
            CostFunctional::Terminal => -params.b * x,
            CostFunctional::Discounted => -params.discount(t) * x,
            CostFunctional::General { terminal, .. } => terminal(t, x),
        }
    }

    /// `−∂ψ/∂x` at time `t` for the linear terminal costs.
    pub fn terminal_weight(&self, params: &ModelParams, t: f64) -> Option<f64> {
        match self {
            CostFunctional::Terminal => Some(params.b),
            CostFunctional::Discounted => Some(params.discount(t)),
            CostFunctional::General { .. } => None,
        }
    }

    /// Whether the running cost is `a u²`.
    pub fn is_quadratic(&self) -> bool {
        !matches!(self, CostFunctional::General { .. })
    }
}

impl fmt::Debug for CostFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunctional::Terminal => f.write_str("Terminal"),
            CostFunctional::Discounted => f.write_str("Discounted"),
            CostFunctional::General { .. } => f.write_str("General(<closures>)"),
        }
    }
}
