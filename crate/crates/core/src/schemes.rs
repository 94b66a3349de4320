//! One-step maps and path simulation on a uniform grid `h = T/n`.
//!
//! ```text
//! EM         X' = X + b h + Σ_j σ_j ΔB^j
//! TMilstein  X' = EM + ½ Σ_{j1,j2≥1} g_{j1j2} (ΔB^{j1}ΔB^{j2} − h·1{j1=j2})
//! Extended   X' = X + Σ_{j=0..d} σ_j ΔB^j
//!                 + ½ Σ_{0≤j1,j2≤d} L_{j1}σ_{j2} (ΔB^{j1}ΔB^{j2} − h·1{j1=j2≠0}),  ΔB⁰ = h
//! ```
//!
//! `g_{j1j2} = L_{j2}σ_{j1}`. The diffusion block of the extended map is the
//! same symmetric double sum as truncated Milstein; the extra terms are
//! `½(L₀b)h²` and `½(L₀σ_j + L_jb) h ΔB^j`. All three maps consume exactly
//! `d` Gaussians per step. The Lévy-area term of the full Milstein map is not
//! simulated; on commutative models it cancels and truncated Milstein is the
//! Milstein scheme.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{CoefficientJet, JetOrder, ModelError, SdeModel, StateVector};
use crate::noise::{NoiseError, NoiseSource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    EulerMaruyama,
    TruncatedMilstein,
    ExtendedMilstein,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::EulerMaruyama,
        SchemeKind::TruncatedMilstein,
        SchemeKind::ExtendedMilstein,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::EulerMaruyama => "em",
            SchemeKind::TruncatedMilstein => "tmilstein",
            SchemeKind::ExtendedMilstein => "extended",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown scheme '{0}' (expected one of: em, tmilstein, extended)")]
pub struct UnknownScheme(pub String);

impl FromStr for SchemeKind {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "em" => Ok(SchemeKind::EulerMaruyama),
            "tmilstein" => Ok(SchemeKind::TruncatedMilstein),
            "extended" => Ok(SchemeKind::ExtendedMilstein),
            other => Err(UnknownScheme(other.to_string())),
        }
    }
}

/// One step's inputs: current state, step size and the `d` increments.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    pub x: &'a [f64],
    pub h: f64,
    pub db: &'a [f64],
}

impl StepInput<'_> {
    fn validate(&self, model: &SdeModel) -> Result<(), SchemeError> {
        model.check_state(self.x)?;
        if self.db.len() != model.noise_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "Brownian increment",
                expected: model.noise_dim(),
                got: self.db.len(),
            }
            .into());
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(SchemeError::InvalidConfig(format!("step size must be positive, got {}", self.h)));
        }
        Ok(())
    }
}

/// Reusable workspace applying one scheme's one-step map.
#[derive(Debug, Clone)]
pub struct Stepper {
    kind: SchemeKind,
    jet: CoefficientJet,
    term: Vec<f64>,
    n: usize,
    d: usize,
}

impl Stepper {
    pub fn new(model: &SdeModel, kind: SchemeKind) -> Self {
        let (n, d) = (model.state_dim(), model.noise_dim());
        Stepper {
            kind,
            jet: CoefficientJet::new(n, d),
            term: vec![0.0; n],
            n,
            d,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    /// Writes the next state into `out`. Inputs are not validated here.
    pub fn step(&mut self, model: &SdeModel, x: &[f64], h: f64, db: &[f64], out: &mut [f64]) {
        let (n, d) = (self.n, self.d);
        let order = match self.kind {
            SchemeKind::EulerMaruyama => JetOrder::Values,
            SchemeKind::TruncatedMilstein => JetOrder::Jacobians,
            SchemeKind::ExtendedMilstein => JetOrder::Hessians,
        };
        self.jet.evaluate_to(model, x, order);
        out.copy_from_slice(x);
        axpy(h, self.jet.column(0), out);
        for j in 1..=d {
            axpy(db[j - 1], self.jet.column(j), out);
        }
        match self.kind {
            SchemeKind::EulerMaruyama => {}
            SchemeKind::TruncatedMilstein => {
                for j1 in 1..=d {
                    for j2 in 1..=d {
                        let weight = db[j1 - 1] * db[j2 - 1] - if j1 == j2 { h } else { 0.0 };
                        // g_{j1 j2} = L_{j2} σ_{j1}
                        self.jet.l_sigma(j2, j1, &mut self.term);
                        axpy(0.5 * weight, &self.term, out);
                    }
                }
            }
            SchemeKind::ExtendedMilstein => {
                let incr = |j: usize| if j == 0 { h } else { db[j - 1] };
                for j1 in 0..=d {
                    for j2 in 0..=d {
                        let mut weight = incr(j1) * incr(j2);
                        if j1 == j2 && j1 != 0 {
                            weight -= h;
                        }
                        self.jet.l_sigma(j1, j2, &mut self.term);
                        axpy(0.5 * weight, &self.term, out);
                    }
                }
            }
        }
        debug_assert_eq!(out.len(), n);
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn one_step(model: &SdeModel, kind: SchemeKind, input: &StepInput<'_>) -> Result<StateVector, SchemeError> {
    input.validate(model)?;
    let mut stepper = Stepper::new(model, kind);
    let mut out = vec![0.0; model.state_dim()];
    stepper.step(model, input.x, input.h, input.db, &mut out);
    Ok(StateVector(out))
}

pub fn step_em(model: &SdeModel, input: &StepInput<'_>) -> Result<StateVector, SchemeError> {
    one_step(model, SchemeKind::EulerMaruyama, input)
}

pub fn step_truncated_milstein(model: &SdeModel, input: &StepInput<'_>) -> Result<StateVector, SchemeError> {
    one_step(model, SchemeKind::TruncatedMilstein, input)
}

pub fn step_extended_milstein(model: &SdeModel, input: &StepInput<'_>) -> Result<StateVector, SchemeError> {
    one_step(model, SchemeKind::ExtendedMilstein, input)
}

/// Horizon, step count, initial state and scheme of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub steps: usize,
    pub x0: StateVector,
    pub scheme: SchemeKind,
}

impl SimConfig {
    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn validate(&self, model: &SdeModel) -> Result<(), SchemeError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SchemeError::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(SchemeError::InvalidConfig("step count must be positive".into()));
        }
        model.check_state(self.x0.as_slice())?;
        Ok(())
    }
}

/// Terminal state of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub state: StateVector,
    /// False when the state overflowed or became NaN; the path is then
    /// excluded from estimates and counted.
    pub valid: bool,
    /// Steps after which a model-declared nonnegative coordinate was negative.
    pub negative_steps: u32,
}

/// Buffers for simulating many paths of one `(model, config)` pair.
pub struct PathSimulator<'m> {
    model: &'m SdeModel,
    steps: usize,
    h: f64,
    x0: Vec<f64>,
    stepper: Stepper,
    increments: Vec<f64>,
    state: Vec<f64>,
    next: Vec<f64>,
}

impl<'m> PathSimulator<'m> {
    pub fn new(model: &'m SdeModel, cfg: &SimConfig) -> Result<Self, SchemeError> {
        cfg.validate(model)?;
        let n = model.state_dim();
        Ok(PathSimulator {
            model,
            steps: cfg.steps,
            h: cfg.step_size(),
            x0: cfg.x0.0.clone(),
            stepper: Stepper::new(model, cfg.scheme),
            increments: vec![0.0; cfg.steps * model.noise_dim()],
            state: vec![0.0; n],
            next: vec![0.0; n],
        })
    }

    /// Simulates one path. Returns `(valid, negative_steps)`; the terminal
    /// state is then available through [`PathSimulator::state`].
    pub fn run(&mut self, noise: &NoiseSource, path_index: u64) -> Result<(bool, u32), SchemeError> {
        let d = self.model.noise_dim();
        noise.fill_increments(path_index, self.steps, d, self.h, &mut self.increments)?;
        Ok(self.run_with_increments())
    }

    /// Simulates with the increments already in [`PathSimulator::increments_mut`].
    pub fn run_with_increments(&mut self) -> (bool, u32) {
        let d = self.model.noise_dim();
        self.state.copy_from_slice(&self.x0);
        let mut negative = 0u32;
        for k in 0..self.steps {
            let db = &self.increments[k * d..(k + 1) * d];
            self.stepper.step(self.model, &self.state, self.h, db, &mut self.next);
            std::mem::swap(&mut self.state, &mut self.next);
            if !self.state.iter().all(|v| v.is_finite()) {
                return (false, negative);
            }
            if self.model.nonnegative_coords().iter().any(|&c| self.state[c] < 0.0) {
                negative += 1;
            }
        }
        (true, negative)
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn increments_mut(&mut self) -> &mut [f64] {
        &mut self.increments
    }
}

/// Applies the configured one-step map `n` times from `x0` using the
/// increments of `(noise, path_index)`.
pub fn simulate_terminal(
    model: &SdeModel,
    cfg: &SimConfig,
    noise: &NoiseSource,
    path_index: u64,
) -> Result<PathOutcome, SchemeError> {
    let mut sim = PathSimulator::new(model, cfg)?;
    let (valid, negative_steps) = sim.run(noise, path_index)?;
    Ok(PathOutcome {
        state: StateVector(sim.state().to_vec()),
        valid,
        negative_steps,
    })
}
