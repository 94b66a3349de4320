//! Preset models, payoffs, estimators, benchmarks, strike sweeps, order
//! fits and the small-noise study.

pub mod benchmark;
pub mod convergence;
pub mod epsilon;
pub mod estimator;
pub mod payoff;
pub mod presets;
pub mod sweep;

pub use benchmark::{
    benchmark, closed_form_benchmark, family_for, BenchmarkCache, BenchmarkEntry, BenchmarkSpec, BenchmarkTable,
};
pub use convergence::{convergence_order, ratio_table, OrderFit, RatioRow};
pub use epsilon::{epsilon_study, EpsilonConfig, EpsilonRow};
pub use estimator::{estimate, estimate_family, EstimateResult, Exec, FamilyEstimate, NoiseAudit, NoiseSpec};
pub use payoff::{Payoff, PayoffFamily, PayoffKind};
pub use presets::{preset, strike_grid, PresetId, PresetModel};
pub use sweep::{strike_sweep, SupError, SweepConfig, SweepResult, SweepRow};

use thiserror::Error;

use crate::model::ModelError;
use crate::noise::NoiseError;
use crate::schemes::SchemeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("unknown model '{0}' (expected bs-asian, heston-asian, gbm or small-diffusion)")]
    UnknownPreset(String),
    #[error("model {preset} has no parameter '{name}' (allowed: {allowed})")]
    UnknownParameter {
        preset: String,
        name: String,
        allowed: String,
    },
    #[error("Feller condition 2*alpha*theta > nu^2 violated: 2*{alpha}*{theta} = {} <= {}", 2.0 * alpha * theta, nu * nu)]
    Feller { alpha: f64, theta: f64, nu: f64 },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("model {0} has no running-average coordinate, so Asian payoffs are undefined")]
    NoAverageCoordinate(String),
    #[error("all {paths} simulated paths were invalid (non-finite state)")]
    AllPathsInvalid { paths: u64 },
    #[error("missing benchmark for strike {strike}: {hint}")]
    MissingBenchmark { strike: f64, hint: String },
    #[error("common random numbers violated at n = {n}: scheme {scheme} consumed different noise")]
    CrnViolation { n: usize, scheme: &'static str },
    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("order fit: {0}")]
    Fit(String),
}
