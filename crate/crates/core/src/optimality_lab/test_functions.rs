use std::fmt;
use std::sync::Arc;

use crate::controlled_sde::Observation;

/// A named functional of the information available at one node, used both
/// as a perturbation direction `θ₀` and as a test function `φ`.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    f: Arc<dyn Fn(&Observation<'_>) -> f64 + Send + Sync>,
}

impl TestFunction {
    pub fn new(name: impl Into<String>, f: impl Fn(&Observation<'_>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, obs: &Observation<'_>) -> f64 {
        (self.f)(obs)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }

    /// `clip(L, −bound, bound)`.
    pub fn info(bound: f64) -> Self {
        Self::new("clip(L)", move |obs| obs.info.clamp(-bound, bound))
    }

    /// `clip(B_t, −bound, bound)`.
    pub fn brownian(bound: f64) -> Self {
        Self::new("clip(B_t)", move |obs| obs.brownian().clamp(-bound, bound))
    }

    /// `clip(L·B_t, −bound, bound)`.
    pub fn info_times_brownian(bound: f64) -> Self {
        Self::new("clip(L*B_t)", move |obs| (obs.info * obs.brownian()).clamp(-bound, bound))
    }

    /// `clip(α_t, −bound, bound)`.
    pub fn drift(bound: f64) -> Self {
        Self::new("clip(alpha_t)", move |obs| obs.drift.clamp(-bound, bound))
    }

    /// Looks up one of the built-in functions by name.
    pub fn by_name(name: &str, bound: f64) -> Option<Self> {
        match name {
            "1" | "one" => Some(Self::constant(1.0)),
            "L" | "clip(L)" => Some(Self::info(bound)),
            "B" | "clip(B_t)" => Some(Self::brownian(bound)),
            "LB" | "clip(L*B_t)" => Some(Self::info_times_brownian(bound)),
            "alpha" | "clip(alpha_t)" => Some(Self::drift(bound)),
            _ => None,
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({})", self.name)
    }
}

/// `{1, clip(L), clip(B_t), clip(L·B_t)}`.
pub fn test_dictionary(bound: f64) -> Vec<TestFunction> {
    vec![
        TestFunction::constant(1.0),
        TestFunction::info(bound),
        TestFunction::brownian(bound),
        TestFunction::info_times_brownian(bound),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping() {
        let hist = [0.0, 0.5, 4.0];
        let obs = Observation {
            index: 2,
            time: 0.5,
            state: 0.0,
            info: -30.0,
            history: &hist,
            drift: 1.0,
        };
        let d = test_dictionary(10.0);
        let v: Vec<f64> = d.iter().map(|t| t.eval(&obs)).collect();
        assert_eq!(v, vec![1.0, -10.0, 4.0, -10.0]);
        assert_eq!(TestFunction::by_name("LB", 10.0).unwrap().name(), "clip(L*B_t)");
        assert!(TestFunction::by_name("nope", 1.0).is_none());
    }
}
