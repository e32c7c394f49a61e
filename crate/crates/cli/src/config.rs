//! Experiment configuration: a JSON file plus command-line overrides.
//!
//! Every field except `kind` has a default; [`ExperimentConfig::resolve`]
//! fills them in so the summary records exactly what was run.

use std::fmt;
use std::path::Path;

use insider_core::paths::{Profile, TimeFunction, Window};
use insider_core::params::ModelParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::experiments::ExperimentKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{line}: {}", self.origin, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Model coefficients as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub r: f64,
    pub r_tilde: f64,
    pub sigma: Profile,
    pub a: f64,
    pub b: f64,
    /// Control horizon `T`.
    pub horizon: f64,
    /// Information horizon `T1`.
    pub info_horizon: f64,
    /// Weight `m` of `L = ∫ m dB`.
    pub weight: Profile,
    pub x0: f64,
    pub t0: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            r: 0.0,
            r_tilde: 0.0,
            sigma: Profile::Constant { value: 1.0 },
            a: 1.0,
            b: 1.0,
            horizon: 1.0,
            info_horizon: 2.0,
            weight: Profile::Constant { value: 1.0 },
            x0: 0.0,
            t0: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn to_params(&self) -> ModelParams {
        ModelParams {
            r: self.r,
            r_tilde: self.r_tilde,
            sigma: TimeFunction::from(self.sigma),
            a: self.a,
            b: self.b,
            horizon: self.horizon,
            info_horizon: self.info_horizon,
            weight: TimeFunction::from(self.weight),
            x0: self.x0,
            t0: self.t0,
        }
    }
}

/// A control policy for the dominance checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Optimal,
    Zero,
    Constant { value: f64 },
    /// `factor · u*`.
    ScaledOptimal { factor: f64 },
    /// `u* + shift` on `window`.
    ShiftedOptimal { shift: f64, window: Window },
    /// The optimal control of an agent who does not know `L`.
    UninformedOptimal,
    /// `u* + coef · clip(L)`.
    InfoLinear { coef: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,

    // forward-convergence
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_ladder: Option<Vec<usize>>,

    // hjb-residual
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_range: Option<f64>,

    // example1, example2
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<PolicyConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominance_paths: Option<usize>,

    // perturbation
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suboptimal_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suboptimal_theta0: Option<String>,

    // martingale
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<Window>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_functions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_info_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_sigma: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_r: Option<f64>,
}

const COMMON_FIELDS: &[&str] = &["kind", "seed", "n_paths", "n_steps", "model", "out"];

/// Command-line values that replace the config file's.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub out: Option<String>,
}

/// 1-based line of the first `"key":` in `text`.
pub fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let at = from + pos;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(text[..at].matches('\n').count() + 1);
        }
        from = at + needle.len();
    }
    None
}

/// Valid kind closest to `name` in edit distance.
pub fn nearest_kind(name: &str) -> ExperimentKind {
    *ExperimentKind::ALL
        .iter()
        .min_by_key(|k| strsim::levenshtein(name, k.name()))
        .expect("kind list is not empty")
}

impl ExperimentConfig {
    /// Reads, overrides, resolves and validates a config file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            origin: origin.clone(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, &origin, overrides)
    }

    pub fn parse(text: &str, origin: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let fail = |line: Option<usize>, message: String| ConfigError {
            origin: origin.to_string(),
            line,
            message,
        };
        let value: Value = serde_json::from_str(text).map_err(|e| fail(Some(e.line()), e.to_string()))?;
        let object = value
            .as_object()
            .ok_or_else(|| fail(Some(1), "config must be a JSON object".into()))?;
        let kind = match object.get("kind") {
            None => return Err(fail(Some(1), "missing field `kind`".into())),
            Some(Value::String(s)) => match ExperimentKind::from_name(s) {
                Some(k) => k,
                None => {
                    return Err(fail(
                        line_of(text, "kind"),
                        format!(
                            "unknown experiment kind \"{s}\"; did you mean \"{}\"? (run `list` for all kinds)",
                            nearest_kind(s).name()
                        ),
                    ))
                }
            },
            Some(other) => return Err(fail(line_of(text, "kind"), format!("`kind` must be a string, got {other}"))),
        };
        for key in object.keys() {
            let known = COMMON_FIELDS.contains(&key.as_str()) || kind.fields().iter().any(|(f, _)| f == key);
            if !known && ALL_FIELDS.contains(&key.as_str()) {
                return Err(fail(
                    line_of(text, key),
                    format!("field `{key}` does not apply to kind {}", kind.name()),
                ));
            }
        }
        let mut config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| fail(Some(e.line()), e.to_string()))?;
        if overrides.seed.is_some() {
            config.seed = overrides.seed;
        }
        if overrides.n_paths.is_some() {
            config.n_paths = overrides.n_paths;
        }
        if overrides.out.is_some() {
            config.out = overrides.out.clone();
        }
        config.resolve();
        config
            .validate()
            .map_err(|(key, message)| fail(key.and_then(|k| line_of(text, k)), message))?;
        Ok(config)
    }

    /// Fills every unset field that applies to this kind with its default.
    pub fn resolve(&mut self) {
        let (n_paths, n_steps) = self.kind.default_sizes();
        self.seed.get_or_insert(1);
        self.n_paths.get_or_insert(n_paths);
        self.n_steps.get_or_insert(n_steps);
        self.out.get_or_insert_with(|| "results".to_string());
        let quarters = |m: &ModelConfig| -> Vec<Window> {
            let h = (m.horizon - m.t0) / 4.0;
            (0..4)
                .map(|k| Window {
                    start: m.t0 + k as f64 * h,
                    end: if k == 3 { m.horizon } else { m.t0 + (k + 1) as f64 * h },
                })
                .collect()
        };
        let second_quarter = |m: &ModelConfig| {
            let h = (m.horizon - m.t0) / 4.0;
            Window {
                start: m.t0 + h,
                end: m.t0 + 2.0 * h,
            }
        };
        match self.kind {
            ExperimentKind::ForwardConvergence => {
                self.eps_ladder.get_or_insert_with(|| vec![8, 4, 2, 1]);
            }
            ExperimentKind::HjbResidual => {
                self.probes.get_or_insert(1000);
                self.x_range.get_or_insert(5.0);
            }
            ExperimentKind::Example1 | ExperimentKind::Example2 => {
                let w = second_quarter(&self.model);
                let first = match self.kind {
                    ExperimentKind::Example1 => PolicyConfig::Zero,
                    _ => PolicyConfig::UninformedOptimal,
                };
                self.policies.get_or_insert_with(|| {
                    vec![
                        first,
                        PolicyConfig::Constant { value: 0.5 },
                        PolicyConfig::ScaledOptimal { factor: 0.5 },
                        PolicyConfig::ScaledOptimal { factor: 1.5 },
                        PolicyConfig::ShiftedOptimal { shift: 0.5, window: w },
                    ]
                });
                self.dominance_paths.get_or_insert(20_000);
            }
            ExperimentKind::Perturbation => {
                let w = second_quarter(&self.model);
                self.window.get_or_insert(w);
                self.theta0.get_or_insert_with(|| "1".to_string());
                self.amplitudes
                    .get_or_insert_with(insider_core::optimality_lab::default_amplitudes);
                self.theta_bound.get_or_insert(10.0);
                self.suboptimal_shift.get_or_insert(0.5);
                self.suboptimal_theta0.get_or_insert_with(|| "L".to_string());
            }
            ExperimentKind::Martingale => {
                let ws = quarters(&self.model);
                self.windows.get_or_insert(ws);
                self.test_functions
                    .get_or_insert_with(|| ["1", "L", "B", "LB"].iter().map(|s| s.to_string()).collect());
                self.theta_bound.get_or_insert(10.0);
                self.negative_info_horizon.get_or_insert(1.05 * self.model.horizon);
                self.negative_n_steps.get_or_insert(1000);
                self.recovery_paths.get_or_insert(100);
                self.recovery_sigma.get_or_insert(Profile::Sine {
                    offset: 1.0,
                    amplitude: 0.5,
                    frequency: 1.0,
                });
                self.recovery_r.get_or_insert(0.05);
            }
            ExperimentKind::Decomposition => {}
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths.unwrap_or(2)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps.unwrap_or(1)
    }

    pub fn out_dir(&self) -> &str {
        self.out.as_deref().unwrap_or("results")
    }

    /// Checks the preconditions of the modules the kind uses. Errors carry
    /// the config key to point at.
    fn validate(&self) -> Result<(), (Option<&'static str>, String)> {
        use insider_core::monte_carlo::information_model;
        use insider_core::optimality_lab::TestFunction;

        let params = self.model.to_params();
        params.validate().map_err(|e| {
            let msg = e.to_string();
            (Some(model_key_for(&msg)), msg)
        })?;
        if self.n_paths() < 2 {
            return Err((Some("n_paths"), format!("n_paths must be at least 2, got {}", self.n_paths())));
        }
        let model = information_model(&params, self.n_steps()).map_err(|e| (Some("n_steps"), e.to_string()))?;
        let grid = model.control_grid();
        let check_window = |key: &'static str, w: &Window| -> Result<(), (Option<&'static str>, String)> {
            let steps = w.step_range(&grid).map_err(|e| (Some(key), e.to_string()))?;
            if w.start < params.t0 || steps.end > grid.n_steps() {
                return Err((Some(key), format!("window ({}, {}] must lie in [t0, T]", w.start, w.end)));
            }
            Ok(())
        };
        let check_fn = |key: &'static str, name: &str| -> Result<(), (Option<&'static str>, String)> {
            TestFunction::by_name(name, 1.0)
                .map(|_| ())
                .ok_or_else(|| (Some(key), format!("unknown function \"{name}\"; expected one of 1, L, B, LB, alpha")))
        };
        if let Some(ladder) = &self.eps_ladder {
            if ladder.is_empty() {
                return Err((Some("eps_ladder"), "eps_ladder is empty".into()));
            }
            if let Some(k) = ladder.iter().find(|&&k| k == 0 || k >= self.n_steps()) {
                return Err((
                    Some("eps_ladder"),
                    format!("eps_ladder entries are step counts in [1, n_steps), got {k}"),
                ));
            }
        }
        if self.probes == Some(0) {
            return Err((Some("probes"), "probes must be positive".into()));
        }
        if let Some(x) = self.x_range {
            if !(x.is_finite() && x > 0.0) {
                return Err((Some("x_range"), format!("x_range must be positive, got {x}")));
            }
        }
        if let Some(policies) = &self.policies {
            for p in policies {
                if let PolicyConfig::ShiftedOptimal { window, .. } = p {
                    check_window("policies", window)?;
                }
            }
        }
        if self.dominance_paths.is_some_and(|n| n < 2) {
            return Err((Some("dominance_paths"), "dominance_paths must be at least 2".into()));
        }
        if let Some(w) = &self.window {
            check_window("window", w)?;
        }
        if let Some(name) = &self.theta0 {
            check_fn("theta0", name)?;
        }
        if let Some(name) = &self.suboptimal_theta0 {
            check_fn("suboptimal_theta0", name)?;
        }
        if let Some(amps) = &self.amplitudes {
            if !amps.contains(&0.0) {
                return Err((Some("amplitudes"), "the amplitude grid must contain 0".into()));
            }
            if amps.iter().any(|y| !y.is_finite()) {
                return Err((Some("amplitudes"), "amplitudes must be finite".into()));
            }
        }
        if let Some(b) = self.theta_bound {
            if !(b.is_finite() && b > 0.0) {
                return Err((Some("theta_bound"), format!("theta_bound must be finite and positive, got {b}")));
            }
        }
        if let Some(ws) = &self.windows {
            if ws.is_empty() {
                return Err((Some("windows"), "windows is empty".into()));
            }
            for w in ws {
                check_window("windows", w)?;
            }
        }
        if let Some(fs) = &self.test_functions {
            if fs.is_empty() {
                return Err((Some("test_functions"), "test_functions is empty".into()));
            }
            for f in fs {
                check_fn("test_functions", f)?;
            }
        }
        if let Some(t1) = self.negative_info_horizon {
            let mut q = params.clone();
            q.info_horizon = t1;
            q.validate().map_err(|e| (Some("negative_info_horizon"), e.to_string()))?;
            information_model(&q, self.negative_n_steps.unwrap_or(self.n_steps()))
                .map_err(|e| (Some("negative_n_steps"), e.to_string()))?;
        }
        if self.recovery_paths == Some(0) {
            return Err((Some("recovery_paths"), "recovery_paths must be positive".into()));
        }
        if let Some(sigma) = &self.recovery_sigma {
            if sigma.inf_abs(0.0, params.horizon) <= 0.0 {
                return Err((Some("recovery_sigma"), "recovery_sigma must be bounded away from zero".into()));
            }
        }
        Ok(())
    }
}

const ALL_FIELDS: &[&str] = &[
    "eps_ladder",
    "probes",
    "x_range",
    "policies",
    "dominance_paths",
    "window",
    "theta0",
    "amplitudes",
    "theta_bound",
    "suboptimal_shift",
    "suboptimal_theta0",
    "windows",
    "test_functions",
    "negative_info_horizon",
    "negative_n_steps",
    "recovery_paths",
    "recovery_sigma",
    "recovery_r",
];

/// Config key a model validation message is about.
fn model_key_for(msg: &str) -> &'static str {
    const KEYS: &[&str] = &["r_tilde", "info_horizon", "horizon", "x0", "t0", "a", "b", "r"];
    if msg.contains("T < T1") {
        return "info_horizon";
    }
    let body = msg.strip_prefix("invalid argument: ").unwrap_or(msg);
    let first = body.split_whitespace().next().unwrap_or("");
    KEYS.iter().find(|k| **k == first).copied().unwrap_or("model")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::parse(text, "test.json", &Overrides::default())
    }

    #[test]
    fn defaults_are_expanded() {
        let c = parse(r#"{"kind": "martingale"}"#).unwrap();
        assert_eq!(c.windows.as_ref().unwrap().len(), 4);
        assert_eq!(c.n_paths, Some(20_000));
        assert!(c.probes.is_none());
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("negative_info_horizon"));
    }

    #[test]
    fn equal_horizons_name_the_invariant_and_line() {
        let text = "{\n  \"kind\": \"example1\",\n  \"model\": {\n    \"horizon\": 1.0,\n    \"info_horizon\": 1.0\n  }\n}";
        let err = parse(text).unwrap_err();
        assert_eq!(err.line, Some(5));
        assert!(err.message.contains("T < T1"), "{err}");
        assert!(err.to_string().starts_with("test.json:5:"));
    }

    #[test]
    fn unknown_kind_suggests_nearest() {
        let err = parse("{\n\"kind\": \"example3\"}").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("\"example1\""), "{err}");
        let err = parse(r#"{"kind": "martingal"}"#).unwrap_err();
        assert!(err.message.contains("\"martingale\""));
    }

    #[test]
    fn misplaced_and_unknown_fields() {
        let err = parse("{\"kind\": \"example1\",\n\"probes\": 3}").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("does not apply"));
        let err = parse("{\"kind\": \"example1\",\n\n\"bogus\": 3}").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("bogus"));
    }

    #[test]
    fn grid_and_window_validation() {
        let err = parse("{\"kind\": \"example1\", \"n_steps\": 4096,\n\"model\": {\"info_horizon\": 1.05}}").unwrap_err();
        assert_eq!(err.line, Some(1));
        assert!(err.message.contains("whole number"), "{err}");
        let err = parse("{\"kind\": \"perturbation\", \"n_steps\": 8,\n\"window\": {\"start\": 0.1, \"end\": 0.5}}").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = parse("{\"kind\": \"perturbation\",\n\"amplitudes\": [0.1, 0.2]}").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn overrides_apply() {
        let o = Overrides {
            seed: Some(9),
            n_paths: Some(10),
            out: Some("x".into()),
        };
        let c = ExperimentConfig::parse(r#"{"kind": "decomposition", "seed": 1}"#, "t", &o).unwrap();
        assert_eq!((c.seed(), c.n_paths(), c.out_dir()), (9, 10, "x"));
    }
}
