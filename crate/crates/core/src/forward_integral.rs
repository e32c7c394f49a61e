//! Discretized forward integral
//! `(1/ε) ∫₀ᵀ v_s (B_{(s+ε)∧T} − B_s) ds` and the Itô left-point sum.
//!
//! `ε` is restricted to `k·dt` and the outer time integral is a left-point
//! Riemann sum, so with `k = 1` the forward estimate performs exactly the
//! same floating-point operations as the Itô sum.

use crate::error::{invalid, Result};
use crate::paths::{BrownianPath, TimeGrid, Window};

/// Node values of an integrand on the grid of the integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrand {
    values: Vec<f64>,
    adapted: bool,
}

impl Integrand {
    pub fn new(values: Vec<f64>, adapted: bool) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("integrand is not finite at node {i}")));
        }
        Ok(Self { values, adapted })
    }

    pub fn constant(grid: &TimeGrid, c: f64) -> Result<Self> {
        Self::new(vec![c; grid.len()], true)
    }

    /// `v = B` itself.
    pub fn from_path(path: &BrownianPath) -> Self {
        Self {
            values: path.values().to_vec(),
            adapted: true,
        }
    }

    /// Indicator of the steps inside `window`.
    pub fn indicator(grid: &TimeGrid, window: Window) -> Result<Self> {
        let steps = window.step_range(grid)?;
        let values = (0..grid.len())
            .map(|i| if steps.contains(&i) { 1.0 } else { 0.0 })
            .collect();
        Ok(Self {
            values,
            adapted: true,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_adapted(&self) -> bool {
        self.adapted
    }

    /// `θ·v` for a path-constant (possibly anticipating) scalar `θ`.
    pub fn scaled(&self, theta: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| theta * v).collect(),
            adapted: self.adapted,
        }
    }

    /// `a·self + c·other`.
    pub fn combine(&self, a: f64, other: &Integrand, c: f64) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(invalid("integrands have different lengths"));
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(v, w)| a * v + c * w)
                .collect(),
            adapted: self.adapted && other.adapted,
        })
    }
}

fn check_shapes(v: &Integrand, b: &BrownianPath) -> Result<()> {
    if v.values.len() != b.values().len() {
        return Err(invalid(format!(
            "integrand has {} nodes but the path has {}",
            v.values.len(),
            b.values().len()
        )));
    }
    Ok(())
}

/// Number of grid steps in `eps`; errors unless `eps = k·dt` with `1 <= k < n`.
pub fn eps_steps(grid: &TimeGrid, eps: f64) -> Result<usize> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let ratio = eps / grid.dt();
    let k = ratio.round();
    if (ratio - k).abs() > 1e-7 || k < 1.0 {
        return Err(invalid(format!(
            "eps = {eps} is not a multiple of dt = {}",
            grid.dt()
        )));
    }
    let k = k as usize;
    if k >= grid.n_steps() {
        return Err(invalid(format!(
            "eps = {eps} must be smaller than the horizon length {}",
            grid.t_end() - grid.t_start()
        )));
    }
    Ok(k)
}

/// `(1/k) Σ_i v_i (B_{min(i+k, n)} − B_i)` where `eps = k·dt`.
pub fn forward_estimate(v: &Integrand, b: &BrownianPath, eps: f64) -> Result<f64> {
    check_shapes(v, b)?;
    let k = eps_steps(b.grid(), eps)?;
    Ok(forward_sum(v.values(), b.values(), k))
}

pub(crate) fn forward_sum(v: &[f64], b: &[f64], k: usize) -> f64 {
    let n = b.len() - 1;
    let mut acc = 0.0;
    for i in 0..n {
        acc += v[i] * (b[(i + k).min(n)] - b[i]);
    }
    acc / k as f64
}

/// `Σ_i v_i (B_{i+1} − B_i)`.
pub fn ito_left_sum(v: &Integrand, b: &BrownianPath) -> Result<f64> {
    check_shapes(v, b)?;
    Ok(forward_sum(v.values(), b.values(), 1))
}

/// `(eps, |forward(eps) − Itô|)` for each `eps`, in the given order.
pub fn compare_forward_ito(v: &Integrand, b: &BrownianPath, eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    if eps_list.is_empty() {
        return Err(invalid("eps list is empty"));
    }
    let ito = ito_left_sum(v, b)?;
    eps_list
        .iter()
        .map(|&eps| Ok((eps, (forward_estimate(v, b, eps)? - ito).abs())))
        .collect()
}

/// Pathwise bound on `|forward(k·dt) − B_T|` for `v ≡ 1`: the estimate is
/// an average of `k` shifted endpoints, so the gap is at most the largest
/// oscillation of the path over a `k`-step window ending at `T`.
pub fn unit_window_bound(b: &BrownianPath, k: usize) -> f64 {
    let v = b.values();
    let n = v.len() - 1;
    let last = v[n];
    v[n.saturating_sub(k)..=n]
        .iter()
        .map(|x| (last - x).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{make_grid, sample_brownian};

    fn path(n: usize, seed: u64) -> BrownianPath {
        sample_brownian(&make_grid(0.0, 1.0, n).unwrap(), seed)
    }

    #[test]
    fn zero_integrand() {
        let b = path(64, 1);
        let v = Integrand::constant(b.grid(), 0.0).unwrap();
        for k in [1, 2, 7] {
            assert_eq!(forward_estimate(&v, &b, k as f64 * b.grid().dt()).unwrap(), 0.0);
        }
    }

    #[test]
    fn unit_integrand_telescopes() {
        let b = path(64, 2);
        let v = Integrand::constant(b.grid(), 1.0).unwrap();
        let dt = b.grid().dt();
        assert!((forward_estimate(&v, &b, dt).unwrap() - b.last()).abs() < 1e-12);
        assert!((ito_left_sum(&v, &b).unwrap() - b.last()).abs() < 1e-12);
        let c = Integrand::constant(b.grid(), 2.5).unwrap();
        assert!((ito_left_sum(&c, &b).unwrap() - 2.5 * b.last()).abs() < 1e-12);
        for k in [2usize, 4, 8] {
            let gap = (forward_estimate(&v, &b, k as f64 * dt).unwrap() - b.last()).abs();
            assert!(gap <= unit_window_bound(&b, k) + 1e-12);
        }
    }

    #[test]
    fn indicator_window() {
        let b = path(100, 3);
        let w = Window::new(0.2, 0.45).unwrap();
        let v = Integrand::indicator(b.grid(), w).unwrap();
        let s = ito_left_sum(&v, &b).unwrap();
        assert!((s - (b.at(45) - b.at(20))).abs() < 1e-12);
    }

    #[test]
    fn forward_at_dt_is_ito_bitwise() {
        let b = path(256, 4);
        let v = Integrand::from_path(&b);
        let f = forward_estimate(&v, &b, b.grid().dt()).unwrap();
        assert_eq!(f.to_bits(), ito_left_sum(&v, &b).unwrap().to_bits());
    }

    #[test]
    fn eps_validation() {
        let b = path(100, 5);
        let v = Integrand::from_path(&b);
        assert!(forward_estimate(&v, &b, 0.015).is_err());
        assert!(forward_estimate(&v, &b, 1.0).is_err());
        assert!(forward_estimate(&v, &b, -0.01).is_err());
        assert!(compare_forward_ito(&v, &b, &[]).is_err());
        let short = Integrand::new(vec![1.0; 10], true).unwrap();
        assert!(ito_left_sum(&short, &b).is_err());
        assert!(Integrand::new(vec![f64::NAN], true).is_err());
    }

    #[test]
    fn random_scaling_table() {
        let b = path(128, 6);
        let w = Integrand::from_path(&b);
        let dt = b.grid().dt();
        let ladder = [8.0 * dt, 4.0 * dt, 2.0 * dt, dt];
        let theta = 0.75;
        let base = compare_forward_ito(&w, &b, &ladder).unwrap();
        let scaled = compare_forward_ito(&w.scaled(theta), &b, &ladder).unwrap();
        for ((_, d0), (_, d1)) in base.iter().zip(&scaled) {
            assert!((d1 - theta * d0).abs() <= 1e-14 * (1.0 + d0.abs()));
        }
    }
}
