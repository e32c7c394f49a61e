//! The seven experiment kinds. Each runner returns its checks, a CSV table
//! and a free-form results record for the JSON summary.

mod decomposition;
mod examples;
mod forward;
mod hjb;
mod martingale;
mod perturbation;

use insider_core::LabError;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;
use crate::output::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Decomposition,
    ForwardConvergence,
    HjbResidual,
    Example1,
    Example2,
    Perturbation,
    Martingale,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Decomposition,
        ExperimentKind::ForwardConvergence,
        ExperimentKind::HjbResidual,
        ExperimentKind::Example1,
        ExperimentKind::Example2,
        ExperimentKind::Perturbation,
        ExperimentKind::Martingale,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Decomposition => "decomposition",
            ExperimentKind::ForwardConvergence => "forward-convergence",
            ExperimentKind::HjbResidual => "hjb-residual",
            ExperimentKind::Example1 => "example1",
            ExperimentKind::Example2 => "example2",
            ExperimentKind::Perturbation => "perturbation",
            ExperimentKind::Martingale => "martingale",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn description(&self) -> &'static str {
        match self {
            ExperimentKind::Decomposition => "B = B~ + ∫α ds: variance of B~_T, its correlation with L, exact reconstruction",
            ExperimentKind::ForwardConvergence => {
                "forward integral against the Itô sum: bit-exact at eps = dt, error ladder for v = B"
            }
            ExperimentKind::HjbResidual => "pointwise HJB infimum of the wealth example's closed-form G at random probes",
            ExperimentKind::Example1 => "wealth example: value certificate and dominance over suboptimal policies",
            ExperimentKind::Example2 => "unit-drift example: value certificate, no-information limit, dominance",
            ExperimentKind::Perturbation => "cost along u* + y θ0 χ and its directional derivative",
            ExperimentKind::Martingale => "E[φ ΔN_u] tests for u* and u ≡ 0, and recovery of B from ∫e^(-b)σ dB",
        }
    }

    /// `(n_paths, n_steps)` when the config leaves them out.
    pub fn default_sizes(&self) -> (usize, usize) {
        match self {
            ExperimentKind::Decomposition => (100_000, 1024),
            ExperimentKind::ForwardConvergence => (1000, 16384),
            ExperimentKind::HjbResidual => (1000, 1024),
            ExperimentKind::Example1 | ExperimentKind::Example2 => (100_000, 4096),
            ExperimentKind::Perturbation => (20_000, 1024),
            ExperimentKind::Martingale => (20_000, 1024),
        }
    }

    /// Kind-specific config fields with a short description.
    pub fn fields(&self) -> &'static [(&'static str, &'static str)] {
        match self {
            ExperimentKind::Decomposition => &[],
            ExperimentKind::ForwardConvergence => &[("eps_ladder", "eps values in steps of dt [8, 4, 2, 1]")],
            ExperimentKind::HjbResidual => &[
                ("probes", "number of random (t, x, ω) probes [1000]"),
                ("x_range", "x is drawn uniformly from [-x_range, x_range] [5]"),
            ],
            ExperimentKind::Example1 | ExperimentKind::Example2 => &[
                ("policies", "suboptimal policies for the dominance check [5 defaults]"),
                ("dominance_paths", "paths per dominance estimate [20000]"),
            ],
            ExperimentKind::Perturbation => &[
                ("window", "perturbation window {start, end} [second quarter of [t0, T]]"),
                ("theta0", "direction: 1, L, B, LB or alpha, clipped [1]"),
                ("amplitudes", "grid of y, must contain 0 [-0.5..0.5 step 0.1]"),
                ("theta_bound", "clip bound of θ0 [10]"),
                ("suboptimal_shift", "shift of the suboptimal policy u* + s χ [0.5]"),
                ("suboptimal_theta0", "direction for the u ≡ 0 sweep [L]"),
            ],
            ExperimentKind::Martingale => &[
                ("windows", "list of {start, end} [quarters of [t0, T]]"),
                ("test_functions", "names among 1, L, B, LB, alpha [1, L, B, LB]"),
                ("theta_bound", "clip bound of test functions [10]"),
                ("negative_info_horizon", "T1 of the u ≡ 0 negative control [1.05 T]"),
                ("negative_n_steps", "n_steps of the negative control [1000]"),
                ("recovery_paths", "paths for the recovery check [100]"),
                ("recovery_sigma", "σ profile for the recovery check [1 + 0.5 sin t]"),
                ("recovery_r", "r for the recovery check [0.05]"),
            ],
        }
    }

    pub fn csv_columns(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Decomposition => &["t", "var_btilde", "corr_btilde_l", "mean_alpha_sq", "alpha_sq_closed_form"],
            ExperimentKind::ForwardConvergence => &["eps_steps", "eps", "median_abs_dev", "mean_abs_dev"],
            ExperimentKind::HjbResidual => {
                &["probe", "path", "t", "x", "alpha", "residual", "u_hjb", "u_closed_form", "rel_error"]
            }
            ExperimentKind::Example1 | ExperimentKind::Example2 => {
                &["policy", "n_paths", "seed", "cost", "std_error", "margin", "pooled_se"]
            }
            ExperimentKind::Perturbation => {
                &["policy", "theta0", "y", "cost", "cost_std_error", "derivative", "derivative_std_error"]
            }
            ExperimentKind::Martingale => {
                &["policy", "window_start", "window_end", "test_function", "mean", "std_error", "z", "pass"]
            }
        }
    }
}

/// One verdict-bearing comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Target or bound the value is compared with.
    pub target: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub rule: String,
    pub pass: bool,
}

impl Check {
    /// `|value − target| <= k·se`.
    pub fn within_se(name: impl Into<String>, value: f64, target: f64, se: f64, k: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            std_error: Some(se),
            rule: format!("|value - target| <= {k} se"),
            pass: (value - target).abs() <= k * se,
        }
    }

    /// `|value − target| <= rel·|target|`.
    pub fn within_rel(name: impl Into<String>, value: f64, target: f64, rel: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            std_error: None,
            rule: format!("|value - target| <= {rel} |target|"),
            pass: (value - target).abs() <= rel * target.abs(),
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            std_error: None,
            rule: "value <= target".into(),
            pass: value <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            std_error: None,
            rule: "value >= target".into(),
            pass: value >= bound,
        }
    }

    pub fn less(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            std_error: None,
            rule: "value < target".into(),
            pass: value < bound,
        }
    }

    pub fn greater(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            std_error: None,
            rule: "value > target".into(),
            pass: value > bound,
        }
    }

    /// Neither infinite nor NaN; the target is reported as `+inf`.
    pub fn finite(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: f64::INFINITY,
            std_error: None,
            rule: "value is finite".into(),
            pass: value.is_finite(),
        }
    }

    pub fn equal(name: impl Into<String>, value: f64, target: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            std_error: None,
            rule: "value == target".into(),
            pass: value == target,
        }
    }
}

/// What a runner produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub checks: Vec<Check>,
    pub table: Table,
    pub results: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// A module precondition the config loader could not see.
    Invalid(String),
    /// The simulation or a minimization broke down.
    Numerical(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(m) => write!(f, "invalid experiment: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<LabError> for RunError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::InvalidArgument(_) | LabError::Domain(_) => RunError::Invalid(e.to_string()),
            LabError::Diverged { .. } | LabError::TooManyDiverged { .. } | LabError::NonConvex { .. } => {
                RunError::Numerical(e.to_string())
            }
        }
    }
}

pub(crate) fn put(results: &mut Map<String, Value>, key: &str, value: impl Serialize) {
    results.insert(key.to_string(), serde_json::to_value(value).expect("serializable result"));
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, RunError> {
    match config.kind {
        ExperimentKind::Decomposition => decomposition::run(config),
        ExperimentKind::ForwardConvergence => forward::run(config),
        ExperimentKind::HjbResidual => hjb::run(config),
        ExperimentKind::Example1 => examples::run(config, examples::Which::One),
        ExperimentKind::Example2 => examples::run(config, examples::Which::Two),
        ExperimentKind::Perturbation => perturbation::run(config),
        ExperimentKind::Martingale => martingale::run(config),
    }
}
