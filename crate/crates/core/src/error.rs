use thiserror::Error;

/// Errors raised by the simulation laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A quantity was requested outside the set where it is defined,
    /// e.g. the information drift at or beyond the information horizon.
    #[error("domain error: {0}")]
    Domain(String),

    /// The state became non-finite. `step` is the first bad node index.
    #[error("simulation diverged at node {step}{}", path.map(|p| format!(" on path {p}")).unwrap_or_default())]
    Diverged { path: Option<usize>, step: usize },

    #[error("too many diverged paths: {diverged} of {total}")]
    TooManyDiverged { diverged: usize, total: usize },

    /// The pointwise HJB expression is not strictly convex in the control.
    #[error("non-convex HJB minimization: curvature {curvature} <= 0")]
    NonConvex { curvature: f64 },
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> LabError {
    LabError::InvalidArgument(msg.into())
}
