//! Information drift for a Gaussian functional `L = ∫₀^{T₁} m dB` and the
//! decomposition `B = B̃ + ∫ α ds` into a Brownian motion of the enlarged
//! filtration plus a drift.
//!
//! The drift is the classical one for an initially enlarged Brownian
//! filtration,
//!
//! ```text
//! α_t = m(t) · (L − ∫₀ᵗ m dB) / ∫ₜ^{T₁} m² ds,      t ≤ T < T₁,
//! ```
//!
//! discretized with a left-point running integral and a trapezoid tail
//! integral on the simulation grid. On a uniform grid with constant `m`
//! the discrete drift is the exact conditional mean of the next increment:
//! `E[ΔB_i | L, B_0..B_i] = α_i dt`.

use std::sync::Arc;

use crate::error::{invalid, LabError, Result};
use crate::paths::{simpson, BrownianPath, TimeGrid, WeightFunction};

/// Grid-level data shared by every path of an experiment: the weight at
/// the nodes and the tail integrals `∫_{t_i}^{T₁} m²`.
#[derive(Debug)]
pub struct GaussianInformation {
    weight: WeightFunction,
    full_grid: TimeGrid,
    horizon_index: usize,
    weights: Vec<f64>,
    tail: Vec<f64>,
}

impl GaussianInformation {
    /// `full_grid` spans `[0, T₁]`; `horizon` is the control horizon `T`,
    /// which must be a node strictly before `T₁`.
    pub fn new(weight: WeightFunction, full_grid: TimeGrid, horizon: f64) -> Result<Self> {
        let horizon_index = full_grid.node(horizon, "control horizon T")?;
        if horizon_index >= full_grid.n_steps() {
            return Err(invalid(format!(
                "control horizon T = {horizon} must be strictly before the information horizon T1 = {}",
                full_grid.t_end()
            )));
        }
        let weights = weight.on_grid(&full_grid);
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(invalid(format!("weight is not finite at t = {}", full_grid.time(i))));
        }
        let n = full_grid.n_steps();
        let dt = full_grid.dt();
        let mut tail = vec![0.0; n + 1];
        for i in (0..n).rev() {
            tail[i] = tail[i + 1] + 0.5 * dt * (weights[i] * weights[i] + weights[i + 1] * weights[i + 1]);
        }
        if tail[horizon_index] <= 0.0 {
            return Err(invalid(format!(
                "weight vanishes on [T, T1]: ∫ m² over [{horizon}, {}] is {}",
                full_grid.t_end(),
                tail[horizon_index]
            )));
        }
        Ok(Self {
            weight,
            full_grid,
            horizon_index,
            weights,
            tail,
        })
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    /// Grid on `[0, T₁]`.
    pub fn full_grid(&self) -> &TimeGrid {
        &self.full_grid
    }

    /// Grid on `[0, T]`, same node times as the full grid.
    pub fn control_grid(&self) -> TimeGrid {
        self.full_grid
            .truncate(self.horizon_index)
            .expect("horizon index validated at construction")
    }

    pub fn horizon_index(&self) -> usize {
        self.horizon_index
    }

    pub fn info_horizon(&self) -> f64 {
        self.full_grid.t_end()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_{t_i}^{T₁} m²` by the trapezoid rule.
    pub fn tail_integral(&self, i: usize) -> f64 {
        self.tail[i]
    }

    /// Analytic `E[α_{t_i}²] = m(t_i)² / ∫_{t_i}^{T₁} m²` with the grid tail integral.
    pub fn drift_second_moment_at(&self, i: usize) -> f64 {
        self.weights[i] * self.weights[i] / self.tail[i]
    }

    /// Field for `path`, with `L` evaluated from the path itself.
    pub fn field(self: &Arc<Self>, path: BrownianPath) -> Result<InfoDriftField> {
        self.check_path(&path)?;
        let running = self.running_integral(&path);
        let info = running[self.full_grid.n_steps()];
        Ok(self.build(path, running, info, true))
    }

    /// Field for `path` with the anticipated value `L = info` imposed.
    pub fn field_with_info(self: &Arc<Self>, path: BrownianPath, info: f64) -> Result<InfoDriftField> {
        self.check_path(&path)?;
        if !info.is_finite() {
            return Err(invalid("information value must be finite"));
        }
        let running = self.running_integral(&path);
        Ok(self.build(path, running, info, true))
    }

    /// Field of an agent without the extra information: `α ≡ 0`, while
    /// `L` is still recorded.
    pub fn uninformed(self: &Arc<Self>, path: BrownianPath) -> Result<InfoDriftField> {
        self.check_path(&path)?;
        let running = self.running_integral(&path);
        let info = running[self.full_grid.n_steps()];
        Ok(self.build(path, running, info, false))
    }

    fn check_path(&self, path: &BrownianPath) -> Result<()> {
        if !path.grid().matches(&self.full_grid) {
            return Err(invalid(
                "path grid does not match the information grid on [0, T1]",
            ));
        }
        Ok(())
    }

    fn running_integral(&self, path: &BrownianPath) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.full_grid.len());
        let mut acc = 0.0;
        out.push(acc);
        for i in 0..self.full_grid.n_steps() {
            acc += self.weights[i] * path.increment(i);
            out.push(acc);
        }
        out
    }

    fn build(self: &Arc<Self>, path: BrownianPath, running: Vec<f64>, info: f64, informed: bool) -> InfoDriftField {
        let drift = (0..=self.horizon_index)
            .map(|i| {
                if informed {
                    self.weights[i] * (info - running[i]) / self.tail[i]
                } else {
                    0.0
                }
            })
            .collect();
        InfoDriftField {
            model: Arc::clone(self),
            path,
            running,
            info,
            drift,
            informed,
        }
    }
}

/// The information drift evaluated along one path.
#[derive(Debug, Clone)]
pub struct InfoDriftField {
    model: Arc<GaussianInformation>,
    path: BrownianPath,
    running: Vec<f64>,
    info: f64,
    drift: Vec<f64>,
    informed: bool,
}

impl InfoDriftField {
    pub fn model(&self) -> &GaussianInformation {
        &self.model
    }

    /// The underlying path on `[0, T₁]`.
    pub fn path(&self) -> &BrownianPath {
        &self.path
    }

    /// The value of `L` this field conditions on.
    pub fn info(&self) -> f64 {
        self.info
    }

    pub fn is_informed(&self) -> bool {
        self.informed
    }

    /// `α_{t_i}` for nodes `0..=N_T` of the control grid.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn control_grid(&self) -> TimeGrid {
        self.model.control_grid()
    }

    /// `∫₀^{t_i} m dB`, left-point.
    pub fn running_integral(&self, i: usize) -> f64 {
        self.running[i]
    }
}

/// `α_{t_i}(L)` at any node strictly before `T₁`.
pub fn information_drift(field: &InfoDriftField, i: usize) -> Result<f64> {
    let model = field.model();
    let grid = model.full_grid();
    if i >= grid.n_steps() {
        return Err(LabError::Domain(format!(
            "information drift is undefined at t = {} >= T1 = {}",
            grid.time(i.min(grid.n_steps())),
            grid.t_end()
        )));
    }
    if let Some(&a) = field.drift.get(i) {
        return Ok(a);
    }
    if !field.informed {
        return Ok(0.0);
    }
    Ok(model.weights[i] * (field.info - field.running[i]) / model.tail[i])
}

/// `B̃_{t_i} = B_{t_i} − Σ_{j<i} α_j dt` on `[0, T]`.
pub fn decompose(path: &BrownianPath, field: &InfoDriftField) -> Result<BrownianPath> {
    if !path.grid().matches(field.path().grid()) {
        return Err(invalid("path and drift field live on different grids"));
    }
    let grid = field.control_grid();
    let dt = grid.dt();
    let mut values = Vec::with_capacity(grid.len());
    let mut drift_integral = 0.0;
    for i in 0..grid.len() {
        values.push(path.at(i) - drift_integral);
        drift_integral += field.drift[i] * dt;
    }
    BrownianPath::from_values(grid, values, path.seed(), path.stream())
}

/// `Σ_{j<i} α_j dt` for every node of the control grid.
pub fn drift_integral(field: &InfoDriftField) -> Vec<f64> {
    let dt = field.control_grid().dt();
    let mut out = Vec::with_capacity(field.drift.len());
    let mut acc = 0.0;
    for a in &field.drift {
        out.push(acc);
        acc += a * dt;
    }
    out
}

/// Analytic `E[α_s²] = m(s)² / ∫_s^{T₁} m² du`, with a fine Simpson rule
/// for the denominator.
pub fn drift_second_moment(m: &WeightFunction, s: f64, info_horizon: f64) -> Result<f64> {
    if s >= info_horizon {
        return Err(LabError::Domain(format!(
            "second moment of the drift is undefined at s = {s} >= T1 = {info_horizon}"
        )));
    }
    let denom = simpson(|u| m.eval(u).powi(2), s, info_horizon, 4096);
    if denom <= 0.0 {
        return Err(LabError::Domain(format!(
            "∫ m² over [{s}, {info_horizon}] vanishes"
        )));
    }
    Ok(m.eval(s).powi(2) / denom)
}
