//! Stochastic control for an insider whose filtration is initially
//! enlarged by `L = ∫₀^{T₁} m dB`.
//!
//! * [`paths`]: grids, Brownian paths, the functional `L` and quadrature.
//! * [`enlargement`]: the information drift `α` and the decomposition
//!   `B = B̃ + ∫ α`.
//! * [`forward_integral`]: the forward integral of anticipating integrands.
//! * [`controlled_sde`]: Euler–Maruyama for the controlled state.
//! * [`hjb_insider`]: HJB verification and the closed-form examples.
//! * [`optimality_lab`]: Monte Carlo costs, perturbations and martingale
//!   diagnostics.

pub mod controlled_sde;
pub mod enlargement;
pub mod error;
pub mod forward_integral;
pub mod hjb_insider;
pub mod monte_carlo;
pub mod optimality_lab;
pub mod params;
pub mod paths;
pub mod stats;

pub use error::{LabError, Result};
pub use stats::EstimateWithError;
