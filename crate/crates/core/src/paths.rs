//! Uniform time grids, seeded Brownian trajectories and the Gaussian
//! information functional `L = ∫ m dB`.
//!
//! Every trajectory is a pure function of `(grid, seed, stream)`: the seed
//! keys a ChaCha8 generator and the stream selects an independent
//! sub-sequence, so path `p` of a Monte Carlo batch is reproducible on its
//! own and batches can be generated in any order.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative slack (in units of `dt`) used when locating a time on a grid.
const NODE_TOLERANCE: f64 = 1e-7;

/// Uniform discretization of `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) {
            return Err(invalid("grid endpoints must be finite"));
        }
        if t_end <= t_start {
            return Err(invalid(format!(
                "grid span must be positive, got [{t_start}, {t_end}]"
            )));
        }
        if n_steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        Ok(Self {
            t_start,
            t_end,
            n_steps,
            dt: (t_end - t_start) / n_steps as f64,
        })
    }

    /// Grid with a prescribed spacing; `t_end` is `t_start + n_steps * dt`.
    pub fn with_spacing(t_start: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid(format!("grid spacing must be positive, got {dt}")));
        }
        let mut grid = Self::new(t_start, t_start + dt * n_steps as f64, n_steps)?;
        grid.dt = dt;
        Ok(grid)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of node `i`. The last node is `t_end` exactly.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the node at time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t_start) / self.dt).round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        let k = k as usize;
        if (self.time(k) - t).abs() <= NODE_TOLERANCE * self.dt {
            Some(k)
        } else {
            None
        }
    }

    /// Like [`index_of`](Self::index_of) but with an error naming `what`.
    pub fn node(&self, t: f64, what: &str) -> Result<usize> {
        self.index_of(t).ok_or_else(|| {
            invalid(format!(
                "{what} = {t} is not a node of the grid [{}, {}] with dt = {}",
                self.t_start, self.t_end, self.dt
            ))
        })
    }

    /// The grid restricted to its first `n_steps` steps, keeping `dt`
    /// so node times agree bit for bit.
    pub fn truncate(&self, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || n_steps > self.n_steps {
            return Err(invalid(format!(
                "cannot truncate a {}-step grid to {n_steps} steps",
                self.n_steps
            )));
        }
        Ok(Self {
            t_start: self.t_start,
            t_end: self.time(n_steps),
            n_steps,
            dt: self.dt,
        })
    }

    /// The grid starting at node `i0`, same spacing.
    pub fn tail_from(&self, i0: usize) -> Result<Self> {
        if i0 >= self.n_steps {
            return Err(invalid(format!(
                "start node {i0} leaves no steps on a {}-step grid",
                self.n_steps
            )));
        }
        Ok(Self {
            t_start: self.time(i0),
            t_end: self.t_end,
            n_steps: self.n_steps - i0,
            dt: self.dt,
        })
    }

    /// Same nodes up to floating roundoff.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps
            && (self.t_start - other.t_start).abs() <= NODE_TOLERANCE * self.dt
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
    }
}

pub fn make_grid(t_start: f64, t_end: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(t_start, t_end, n_steps)
}

/// A window `(start, end]` on which an indicator is switched on.
///
/// On a grid, step `i` (the interval `[t_i, t_{i+1})` carrying the
/// left-point value) belongs to the window iff `start <= t_i` and
/// `t_{i+1} <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(invalid(format!("window ({start}, {end}] is empty")));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Node range `[first, last)` of the steps inside the window; both
    /// endpoints must be grid nodes.
    pub fn step_range(&self, grid: &TimeGrid) -> Result<std::ops::Range<usize>> {
        let first = grid.node(self.start, "window start")?;
        let last = grid.node(self.end, "window end")?;
        if last <= first {
            return Err(invalid(format!(
                "window ({}, {}] contains no grid step",
                self.start, self.end
            )));
        }
        Ok(first..last)
    }
}

/// Serializable description of a deterministic function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64 },
    /// `intercept + slope * t`
    Affine { intercept: f64, slope: f64 },
    /// `offset + amplitude * sin(frequency * t)`
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Affine { intercept, slope } => intercept + slope * t,
            Profile::Sine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (frequency * t).sin(),
        }
    }

    /// Upper bound of `|f|` on `[t0, t1]`.
    pub fn sup_abs(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value.abs(),
            Profile::Affine { .. } => self.eval(t0).abs().max(self.eval(t1).abs()),
            Profile::Sine {
                offset, amplitude, ..
            } => offset.abs() + amplitude.abs(),
        }
    }

    /// Lower bound of `|f|` on `[t0, t1]` (zero when a sign change is possible).
    pub fn inf_abs(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value.abs(),
            Profile::Affine { .. } => {
                let (a, b) = (self.eval(t0), self.eval(t1));
                if a * b <= 0.0 {
                    0.0
                } else {
                    a.abs().min(b.abs())
                }
            }
            Profile::Sine {
                offset, amplitude, ..
            } => (offset.abs() - amplitude.abs()).max(0.0),
        }
    }

    /// Upper bound of `|f'|` on any interval.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Profile::Constant { .. } => 0.0,
            Profile::Affine { slope, .. } => slope.abs(),
            Profile::Sine {
                amplitude,
                frequency,
                ..
            } => (amplitude * frequency).abs(),
        }
    }
}

/// A deterministic function of time evaluated at grid nodes.
///
/// Built either from a [`Profile`] (serializable) or from an arbitrary
/// closure.
#[derive(Clone)]
pub struct TimeFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    profile: Option<Profile>,
}

/// The weight `m` of the information functional `L = ∫₀^{T₁} m dB`.
pub type WeightFunction = TimeFunction;

impl TimeFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            profile: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }.into()
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn profile(&self) -> Option<&Profile> {
        self.profile.as_ref()
    }

    pub fn on_grid(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.eval(grid.time(i))).collect()
    }
}

impl From<Profile> for TimeFunction {
    fn from(profile: Profile) -> Self {
        Self {
            f: Arc::new(move |t| profile.eval(t)),
            profile: Some(profile),
        }
    }
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.profile {
            Some(p) => write!(f, "TimeFunction({p:?})"),
            None => f.write_str("TimeFunction(<closure>)"),
        }
    }
}

/// A sampled Brownian trajectory, `values[i] = B_{t_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    values: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl BrownianPath {
    /// Wraps externally produced values; `values[0]` must be 0.
    pub fn from_values(grid: TimeGrid, values: Vec<f64>, seed: u64, stream: u64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "path has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(invalid("a Brownian path must start at 0"));
        }
        Ok(Self {
            grid,
            values,
            seed,
            stream,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn increment(&self, i: usize) -> f64 {
        self.values[i + 1] - self.values[i]
    }

    /// The path on its first `n_steps` steps.
    pub fn truncate(&self, n_steps: usize) -> Result<Self> {
        let grid = self.grid.truncate(n_steps)?;
        Ok(Self {
            grid,
            values: self.values[..=n_steps].to_vec(),
            seed: self.seed,
            stream: self.stream,
        })
    }

    /// Keeps every `factor`-th node, i.e. aggregates `factor` increments
    /// into one.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.grid.n_steps.is_multiple_of(factor) {
            return Err(invalid(format!(
                "cannot coarsen {} steps by {factor}",
                self.grid.n_steps
            )));
        }
        let grid = TimeGrid::with_spacing(
            self.grid.t_start,
            self.grid.dt * factor as f64,
            self.grid.n_steps / factor,
        )?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Ok(Self {
            grid,
            values,
            seed: self.seed,
            stream: self.stream,
        })
    }
}

/// Generator for stream `stream` of `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Brownian path on `grid` from stream 0 of `seed`.
pub fn sample_brownian(grid: &TimeGrid, seed: u64) -> BrownianPath {
    sample_brownian_stream(grid, seed, 0)
}

/// Brownian path on `grid` from an independent stream of `seed`.
pub fn sample_brownian_stream(grid: &TimeGrid, seed: u64, stream: u64) -> BrownianPath {
    let mut rng = path_rng(seed, stream);
    let scale = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.len());
    let mut b = 0.0;
    values.push(b);
    for _ in 0..grid.n_steps() {
        let z: f64 = StandardNormal.sample(&mut rng);
        b += scale * z;
        values.push(b);
    }
    BrownianPath {
        grid: *grid,
        values,
        seed,
        stream,
    }
}

/// Left-point Itô sum `Σ m(t_i)(B_{t_{i+1}} − B_{t_i})` over `[t_start, info_horizon]`.
pub fn eval_l(m: &WeightFunction, path: &BrownianPath, info_horizon: f64) -> Result<f64> {
    let grid = path.grid();
    if info_horizon > grid.t_end() + NODE_TOLERANCE * grid.dt() {
        return Err(invalid(format!(
            "path ends at {} before the information horizon {info_horizon}",
            grid.t_end()
        )));
    }
    let end = grid.node(info_horizon, "information horizon")?;
    Ok((0..end)
        .map(|i| m.eval(grid.time(i)) * path.increment(i))
        .sum())
}

/// Composite trapezoid rule of `values` (node samples) with spacing `dt`.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dt * (0.5 * (values[0] + values[n - 1]) + inner)
        }
    }
}

/// Cumulative trapezoid integrals, `out[i] = ∫_{t_0}^{t_i}`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(acc);
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// `∫_a^b f` by composite Simpson with `panels` (even) sub-intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = make_grid(0.0, 2.0, 1).unwrap();
        assert_eq!(g.times(), vec![0.0, 2.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(1.0, 0.0, 4).is_err());
        assert!(make_grid(0.0, 0.0, 4).is_err());
        assert!(make_grid(0.0, 1.0, 0).is_err());
        assert!(make_grid(0.0, f64::NAN, 3).is_err());
    }

    #[test]
    fn grid_end_is_exact() {
        let g = make_grid(0.1, 0.7, 3).unwrap();
        assert_eq!(g.time(3), 0.7);
        assert_eq!(g.index_of(0.7), Some(3));
        assert_eq!(g.index_of(0.3), Some(1));
        assert_eq!(g.index_of(0.35), None);
        assert!(g.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn truncation_keeps_node_times() {
        let full = make_grid(0.0, 2.0, 2048).unwrap();
        let half = full.truncate(1024).unwrap();
        for i in 0..half.len() {
            assert_eq!(half.time(i).to_bits(), full.time(i).to_bits());
        }
        assert!((half.t_end() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_steps() {
        let g = make_grid(0.0, 1.0, 10).unwrap();
        let w = Window::new(0.2, 0.5).unwrap();
        assert_eq!(w.step_range(&g).unwrap(), 2..5);
        assert!(Window::new(0.5, 0.5).is_err());
        assert!(Window::new(0.25, 0.5).unwrap().step_range(&g).is_err());
    }

    #[test]
    fn brownian_is_deterministic() {
        let g = make_grid(0.0, 1.0, 64).unwrap();
        let a = sample_brownian(&g, 7);
        let b = sample_brownian(&g, 7);
        assert_eq!(a, b);
        assert_eq!(a.at(0), 0.0);
        assert_ne!(a, sample_brownian(&g, 8));
        assert_ne!(a.values(), sample_brownian_stream(&g, 7, 1).values());
    }

    #[test]
    fn l_of_zero_and_unit_weights() {
        let g = make_grid(0.0, 2.0, 200).unwrap();
        let p = sample_brownian(&g, 3);
        assert_eq!(eval_l(&TimeFunction::constant(0.0), &p, 2.0).unwrap(), 0.0);
        let l = eval_l(&TimeFunction::constant(1.0), &p, 2.0).unwrap();
        assert!((l - p.last()).abs() < 1e-12);
    }

    #[test]
    fn l_needs_full_horizon() {
        let g = make_grid(0.0, 1.0, 100).unwrap();
        let p = sample_brownian(&g, 3);
        assert!(eval_l(&TimeFunction::constant(1.0), &p, 2.0).is_err());
    }

    #[test]
    fn quadratures() {
        let v: Vec<f64> = (0..=4).map(|i| i as f64).collect();
        assert!((trapezoid(&v, 0.25) - 2.0).abs() < 1e-15);
        let c = cumulative_trapezoid(&v, 0.25);
        assert!((c[4] - 2.0).abs() < 1e-15);
        let s = simpson(|u| (u + 1.0) * (u + 1.0), 0.0, 2.0, 8);
        assert!((s - 26.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn profile_bounds() {
        let p = Profile::Sine {
            offset: 1.0,
            amplitude: 0.5,
            frequency: 1.0,
        };
        assert_eq!(p.inf_abs(0.0, 1.0), 0.5);
        assert_eq!(p.sup_abs(0.0, 1.0), 1.5);
        let a = Profile::Affine {
            intercept: -1.0,
            slope: 2.0,
        };
        assert_eq!(a.inf_abs(0.0, 1.0), 0.0);
    }
}
