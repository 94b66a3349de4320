//! Weak approximation of multi-dimensional Itô SDEs.
//!
//! * [`model`]: coefficients, the operators `L_j`, Lie brackets, the
//!   Stratonovich drift, commutativity diagnosis and the leading-error
//!   coefficient tensors.
//! * [`schemes`]: Euler–Maruyama, truncated Milstein and extended Milstein
//!   one-step maps and path simulation.
//! * [`noise`]: seeded pseudo-random and randomized Sobol increments.
//! * [`experiments`]: preset models, payoffs, estimators, benchmarks, strike
//!   sweeps, order fits and the small-diffusion study.

pub mod experiments;
pub mod model;
pub mod noise;
pub mod schemes;

pub use model::{SdeModel, StateVector};
pub use noise::{NoiseKind, NoiseSource};
pub use schemes::{SchemeKind, SimConfig};
