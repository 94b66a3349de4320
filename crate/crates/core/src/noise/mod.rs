//! Sources of Brownian increments.
//!
//! Every increment is a pure function of
//! `(kind, seed, replication_index, path_index, step, column)`, so paths can be
//! simulated in any order on any number of workers. Both modes map one
//! uniform per Gaussian through [`inverse_normal_cdf`], which keeps the
//! `(step, column) → coordinate` layout identical between them: coordinate
//! `k·d + j` drives column `j` at step `k`.
//!
//! * `PseudoRandom`: ChaCha8 keyed by the seed, one stream per path.
//! * `RandomizedSobol`: point `path_index` of a digitally shifted Sobol
//!   sequence in dimension `n·d`; the shift is drawn from the seed and the
//!   replication index.

mod normal;
pub mod sobol;

pub use normal::{inverse_normal_cdf, inverse_normal_cdf_unchecked};
pub use sobol::SobolSequence;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise budget exceeded: {requested} increments requested, {available} per path available")]
    BudgetExceeded { requested: usize, available: usize },
    #[error("inverse normal CDF argument {0} outside (0, 1)")]
    QuantileDomain(f64),
    #[error("Sobol dimension {requested} unsupported (1..={max})")]
    SobolDimension { requested: usize, max: usize },
    #[error("path index {0} exceeds the Sobol sequence length")]
    PathIndexOutOfRange(u64),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    PseudoRandom,
    RandomizedSobol,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::PseudoRandom => "mc",
            NoiseKind::RandomizedSobol => "qmc",
        }
    }
}

const SHIFT_STREAM_BASE: u64 = 1 << 63;

#[derive(Debug, Clone)]
pub struct NoiseSource {
    kind: NoiseKind,
    seed: u64,
    dims_per_path: usize,
    replication_index: u32,
    key: [u8; 32],
    sobol: Option<SobolSequence>,
    /// Digital shift per Sobol coordinate; empty for the raw sequence.
    shift: Vec<u32>,
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
    key
}

#[inline]
fn u64_to_open_unit(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

impl NoiseSource {
    pub fn pseudo_random(seed: u64, dims_per_path: usize) -> Self {
        NoiseSource {
            kind: NoiseKind::PseudoRandom,
            seed,
            dims_per_path,
            replication_index: 0,
            key: key_from_seed(seed),
            sobol: None,
            shift: Vec::new(),
        }
    }

    pub fn randomized_sobol(seed: u64, dims_per_path: usize, replication_index: u32) -> Result<Self, NoiseError> {
        let sobol = SobolSequence::new(dims_per_path)?;
        let key = key_from_seed(seed);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(SHIFT_STREAM_BASE + replication_index as u64);
        let shift = (0..dims_per_path).map(|_| rng.next_u32()).collect();
        Ok(NoiseSource {
            kind: NoiseKind::RandomizedSobol,
            seed,
            dims_per_path,
            replication_index,
            key,
            sobol: Some(sobol),
            shift,
        })
    }

    /// Unrandomized Sobol points; the origin is skipped, so path `p` uses
    /// point `p + 1`.
    pub fn sobol_unshifted(dims_per_path: usize) -> Result<Self, NoiseError> {
        Ok(NoiseSource {
            kind: NoiseKind::RandomizedSobol,
            seed: 0,
            dims_per_path,
            replication_index: 0,
            key: [0; 32],
            sobol: Some(SobolSequence::new(dims_per_path)?),
            shift: Vec::new(),
        })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims_per_path(&self) -> usize {
        self.dims_per_path
    }

    pub fn replication_index(&self) -> u32 {
        self.replication_index
    }

    /// Writes `out.len()` uniforms in `(0, 1)` for the given path.
    pub fn fill_uniforms(&self, path_index: u64, out: &mut [f64]) -> Result<(), NoiseError> {
        if out.len() > self.dims_per_path {
            return Err(NoiseError::BudgetExceeded {
                requested: out.len(),
                available: self.dims_per_path,
            });
        }
        match &self.sobol {
            None => {
                let mut rng = ChaCha8Rng::from_seed(self.key);
                rng.set_stream(path_index);
                for u in out.iter_mut() {
                    *u = u64_to_open_unit(rng.next_u64());
                }
            }
            Some(seq) => {
                let index = if self.shift.is_empty() { path_index + 1 } else { path_index };
                let index = u32::try_from(index).map_err(|_| NoiseError::PathIndexOutOfRange(path_index))?;
                let mut raw = vec![0u32; seq.dims()];
                seq.point(index, &mut raw);
                if !self.shift.is_empty() {
                    raw.iter_mut().zip(&self.shift).for_each(|(x, s)| *x ^= s);
                }
                for (u, x) in out.iter_mut().zip(&raw) {
                    *u = sobol::to_unit(*x);
                }
            }
        }
        Ok(())
    }

    /// Writes the `n × d` increments (step-major) of one path into `out`,
    /// each distributed as `N(0, h)`.
    pub fn fill_increments(&self, path_index: u64, n: usize, d: usize, h: f64, out: &mut [f64]) -> Result<(), NoiseError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(NoiseError::InvalidStep(h));
        }
        let count = n * d;
        if out.len() < count {
            return Err(NoiseError::BudgetExceeded {
                requested: count,
                available: out.len(),
            });
        }
        let out = &mut out[..count];
        self.fill_uniforms(path_index, out)?;
        let scale = h.sqrt();
        for v in out.iter_mut() {
            *v = scale * inverse_normal_cdf_unchecked(*v);
        }
        Ok(())
    }

    pub fn gaussian_increments(&self, path_index: u64, n: usize, d: usize, h: f64) -> Result<Vec<f64>, NoiseError> {
        let mut out = vec![0.0; n * d];
        self.fill_increments(path_index, n, d, h, &mut out)?;
        Ok(out)
    }
}
