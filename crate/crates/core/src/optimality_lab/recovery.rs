use crate::error::{invalid, LabError, Result};
use crate::params::ModelParams;
use crate::paths::{BrownianPath, TimeGrid};

/// `R_t = ∫₀ᵗ e^{−b_s} σ_s dB_s` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedNoise {
    grid: TimeGrid,
    values: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl IntegratedNoise {
    pub fn from_values(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("noise path length does not match its grid"));
        }
        Ok(Self {
            grid,
            values,
            seed: 0,
            stream: 0,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `w(s) = e^{−b_s} σ_s`.
fn weight(params: &ModelParams, t: f64) -> f64 {
    params.discount(t) * params.sigma.eval(t)
}

/// Restriction of `b` to `[0, T]`.
fn on_horizon(params: &ModelParams, b: &BrownianPath) -> Result<BrownianPath> {
    if b.grid().t_start() != 0.0 {
        return Err(invalid("the Brownian path must start at t = 0"));
    }
    let n = b.grid().node(params.horizon, "T")?;
    b.truncate(n)
}

fn integrate(params: &ModelParams, b: &BrownianPath, step_weight: impl Fn(f64, f64) -> f64) -> Result<IntegratedNoise> {
    let b = on_horizon(params, b)?;
    let grid = *b.grid();
    let mut values = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    values.push(acc);
    for i in 0..grid.n_steps() {
        let w = step_weight(weight(params, grid.time(i)), weight(params, grid.time(i + 1)));
        acc += w * b.increment(i);
        values.push(acc);
    }
    Ok(IntegratedNoise {
        grid,
        values,
        seed: b.seed(),
        stream: b.stream(),
    })
}

/// Left-point sum `Σ w(t_j) ΔB_j`.
pub fn discounted_noise(params: &ModelParams, b: &BrownianPath) -> Result<IntegratedNoise> {
    integrate(params, b, |left, _| left)
}

/// Trapezoid weights `½(w(t_j) + w(t_{j+1})) ΔB_j`.
pub fn discounted_noise_trapezoid(params: &ModelParams, b: &BrownianPath) -> Result<IntegratedNoise> {
    integrate(params, b, |left, right| 0.5 * (left + right))
}

/// `B_t = ∫₀ᵗ e^{b_s} σ_s^{−1} dR_s`, left point. Requires
/// `|e^{−b} σ| >= lower_bound` on every node.
pub fn semimartingale_recovery(r: &IntegratedNoise, params: &ModelParams, lower_bound: f64) -> Result<BrownianPath> {
    if !(lower_bound.is_finite() && lower_bound > 0.0) {
        return Err(invalid(format!("lower bound must be positive, got {lower_bound}")));
    }
    let grid = &r.grid;
    let mut values = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    values.push(acc);
    for i in 0..grid.n_steps() {
        let t = grid.time(i);
        let w = weight(params, t);
        if w.is_nan() || w.abs() < lower_bound {
            return Err(LabError::Domain(format!(
                "e^(-b) sigma = {w} at t = {t} is below the bound {lower_bound}"
            )));
        }
        acc += (r.values[i + 1] - r.values[i]) / w;
        values.push(acc);
    }
    BrownianPath::from_values(*grid, values, r.seed, r.stream)
}

/// `K = sup|w'| / (2 inf|w|)` on `[0, T]` from the profile of `σ`, so that
/// recovering trapezoid-weighted noise with left-point weights is off by
/// at most `K dt Σ|ΔB|`. `None` when `σ` has no profile.
pub fn recovery_constant(params: &ModelParams) -> Option<f64> {
    let sigma = params.sigma.profile()?;
    let t = params.horizon;
    let r = params.r;
    let (disc_lo, disc_hi) = {
        let end = (-r * t).exp();
        (end.min(1.0), end.max(1.0))
    };
    let inf_w = disc_lo * sigma.inf_abs(0.0, t);
    if inf_w <= 0.0 {
        return None;
    }
    let sup_dw = disc_hi * (sigma.lipschitz() + r.abs() * sigma.sup_abs(0.0, t));
    Some(sup_dw / (2.0 * inf_w))
}
