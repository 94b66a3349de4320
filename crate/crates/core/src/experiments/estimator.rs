//! Monte-Carlo and randomized quasi-Monte-Carlo estimators.
//!
//! ```text
//! f_K(M, n) = (1/M) Σ_{p<M} scale · φ_K(A_T^{(p)} / T)
//! ```
//!
//! Paths are cut into fixed chunks of [`CHUNK`] consecutive path indices.
//! Each chunk accumulates Welford statistics in path order; chunks are then
//! merged strictly in chunk order (Chan's pairwise update). The work split
//! across threads therefore never changes a single bit of the result: the
//! estimate is bit-identical for every `--threads` value.
//!
//! Standard errors: path variance for pseudo-random noise; for randomized
//! Sobol, `sd(replication means) / √R`.

use rayon::prelude::*;

use crate::model::SdeModel;
use crate::noise::{NoiseKind, NoiseSource};
use crate::schemes::{PathSimulator, SimConfig};

use super::payoff::{Payoff, PayoffFamily};
use super::ExperimentError;

/// Paths per work unit.
pub const CHUNK: usize = 1024;

/// Which noise to draw and how it is keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
    /// Independent digital shifts (QMC); always 1 for pseudo-random noise.
    pub replications: u32,
}

impl NoiseSpec {
    pub fn mc(seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::PseudoRandom,
            seed,
            replications: 1,
        }
    }

    pub fn qmc(seed: u64, replications: u32) -> Self {
        NoiseSpec {
            kind: NoiseKind::RandomizedSobol,
            seed,
            replications,
        }
    }

    fn sources(&self, dims: usize) -> Result<Vec<NoiseSource>, ExperimentError> {
        match self.kind {
            NoiseKind::PseudoRandom => Ok(vec![NoiseSource::pseudo_random(self.seed, dims)]),
            NoiseKind::RandomizedSobol => (0..self.replications)
                .map(|r| NoiseSource::randomized_sobol(self.seed, dims, r).map_err(Into::into))
                .collect(),
        }
    }

    /// Paths per replication for a total budget `m`.
    pub fn paths_per_replication(&self, m: usize) -> Result<usize, ExperimentError> {
        match self.kind {
            NoiseKind::PseudoRandom => {
                if self.replications != 1 {
                    return Err(ExperimentError::InvalidParameter(
                        "pseudo-random noise uses exactly one replication".into(),
                    ));
                }
                if m < 2 {
                    return Err(ExperimentError::InvalidParameter(format!("need at least 2 paths, got {m}")));
                }
                Ok(m)
            }
            NoiseKind::RandomizedSobol => {
                let r = self.replications as usize;
                if r < 2 {
                    return Err(ExperimentError::InvalidParameter(
                        "randomized Sobol needs at least 2 replications for an error bar".into(),
                    ));
                }
                if m < r || !m.is_multiple_of(r) {
                    return Err(ExperimentError::InvalidParameter(format!(
                        "QMC budget {m} must be a positive multiple of the {r} replications"
                    )));
                }
                if m / r > u32::MAX as usize {
                    return Err(ExperimentError::InvalidParameter("too many points per replication".into()));
                }
                Ok(m / r)
            }
        }
    }
}

/// Worker-count policy. `threads = None` uses rayon's global pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Exec {
    pub threads: Option<usize>,
}

impl Exec {
    pub fn threads(threads: usize) -> Self {
        Exec { threads: Some(threads) }
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
        match self.threads {
            None => Ok(f()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t.max(1))
                    .build()
                    .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
                Ok(pool.install(f))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub mean: f64,
    pub stderr: f64,
    pub paths_total: u64,
    pub paths_invalid: u64,
    pub replications: u32,
}

/// What the noise pipeline handed to the simulator; equal audits across
/// schemes prove common random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NoiseAudit {
    pub draws: u64,
    /// XOR over paths of a position-sensitive mix of the increment bits.
    pub fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyEstimate {
    pub strikes: Vec<f64>,
    pub results: Vec<EstimateResult>,
    pub audit: NoiseAudit,
    /// Steps (summed over paths) that ended with a nonnegative coordinate below zero.
    pub negative_steps: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * (other.count as f64 / n as f64);
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64 / n as f64);
        self.count = n;
    }

    fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }
}

struct ChunkStats {
    per_strike: Vec<Welford>,
    invalid: u64,
    negative_steps: u64,
    audit: NoiseAudit,
}

#[inline]
fn mix_increments(increments: &[f64]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for (i, v) in increments.iter().enumerate() {
        h ^= v.to_bits().rotate_left((i % 64) as u32);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn run_chunk(
    model: &SdeModel,
    cfg: &SimConfig,
    family: &PayoffFamily,
    noise: &NoiseSource,
    start: usize,
    end: usize,
) -> Result<ChunkStats, ExperimentError> {
    let mut sim = PathSimulator::new(model, cfg)?;
    let mut stats = ChunkStats {
        per_strike: vec![Welford::default(); family.len()],
        invalid: 0,
        negative_steps: 0,
        audit: NoiseAudit::default(),
    };
    let mut values = vec![0.0; family.len()];
    for p in start..end {
        let (valid, neg) = sim.run(noise, p as u64)?;
        stats.audit.draws += sim.increments().len() as u64;
        stats.audit.fingerprint ^= mix_increments(sim.increments()).wrapping_add(p as u64);
        stats.negative_steps += neg as u64;
        if !valid {
            stats.invalid += 1;
            continue;
        }
        family.evaluate_into(sim.state(), &mut values);
        for (w, v) in stats.per_strike.iter_mut().zip(&values) {
            w.push(*v);
        }
    }
    Ok(stats)
}

/// Estimates every strike of `family` from one set of simulated paths.
pub fn estimate_family(
    model: &SdeModel,
    cfg: &SimConfig,
    family: &PayoffFamily,
    noise: &NoiseSpec,
    m: usize,
    exec: &Exec,
) -> Result<FamilyEstimate, ExperimentError> {
    cfg.validate(model)?;
    if family.average_coordinate >= model.state_dim() {
        return Err(ExperimentError::InvalidParameter(format!(
            "average coordinate {} outside the {}-dimensional state",
            family.average_coordinate,
            model.state_dim()
        )));
    }
    let per_rep = noise.paths_per_replication(m)?;
    let sources = noise.sources(cfg.steps * model.noise_dim())?;
    let units: Vec<(usize, usize, usize)> = (0..sources.len())
        .flat_map(|r| (0..per_rep).step_by(CHUNK).map(move |s| (r, s, (s + CHUNK).min(per_rep))))
        .collect();

    let chunks: Vec<Result<ChunkStats, ExperimentError>> = exec.install(|| {
        units
            .par_iter()
            .map(|&(r, s, e)| run_chunk(model, cfg, family, &sources[r], s, e))
            .collect()
    })?;

    let k = family.len();
    let mut reps = vec![vec![Welford::default(); k]; sources.len()];
    let mut invalid = 0u64;
    let mut negative_steps = 0u64;
    let mut audit = NoiseAudit::default();
    for (unit, chunk) in units.iter().zip(chunks) {
        let chunk = chunk?;
        for (acc, w) in reps[unit.0].iter_mut().zip(&chunk.per_strike) {
            acc.merge(w);
        }
        invalid += chunk.invalid;
        negative_steps += chunk.negative_steps;
        audit.draws += chunk.audit.draws;
        audit.fingerprint ^= chunk.audit.fingerprint;
    }

    let total = m as u64;
    if reps.iter().any(|r| r[0].count == 0) {
        return Err(ExperimentError::AllPathsInvalid { paths: total });
    }
    let results = (0..k)
        .map(|j| match noise.kind {
            NoiseKind::PseudoRandom => {
                let w = &reps[0][j];
                EstimateResult {
                    mean: w.mean,
                    stderr: (w.sample_variance() / w.count as f64).sqrt(),
                    paths_total: total,
                    paths_invalid: invalid,
                    replications: 1,
                }
            }
            NoiseKind::RandomizedSobol => {
                let mut across = Welford::default();
                for rep in &reps {
                    across.push(rep[j].mean);
                }
                EstimateResult {
                    mean: across.mean,
                    stderr: (across.sample_variance() / across.count as f64).sqrt(),
                    paths_total: total,
                    paths_invalid: invalid,
                    replications: reps.len() as u32,
                }
            }
        })
        .collect();
    Ok(FamilyEstimate {
        strikes: family.strikes.clone(),
        results,
        audit,
        negative_steps,
    })
}

/// Estimates one payoff; see [`estimate_family`].
pub fn estimate(
    model: &SdeModel,
    cfg: &SimConfig,
    payoff: &Payoff,
    noise: &NoiseSpec,
    m: usize,
    exec: &Exec,
) -> Result<EstimateResult, ExperimentError> {
    Ok(estimate_family(model, cfg, &payoff.as_family(), noise, m, exec)?.results[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::payoff::PayoffKind;
    use crate::experiments::presets::preset;
    use crate::schemes::SchemeKind;

    fn bs_cfg(steps: usize, scheme: SchemeKind) -> (crate::experiments::PresetModel, SimConfig) {
        let p = preset("bs-asian", &[]).unwrap();
        let cfg = SimConfig {
            horizon: p.horizon,
            steps,
            x0: p.x0.clone(),
            scheme,
        };
        (p, cfg)
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 17) as f64 * 0.3).collect();
        let mut whole = Welford::default();
        xs.iter().for_each(|x| whole.push(*x));
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..41].iter().for_each(|x| a.push(*x));
        xs[41..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert!((a.mean - whole.mean).abs() < 1e-12);
        assert!((a.m2 - whole.m2).abs() < 1e-9);
    }

    #[test]
    fn digital_with_zero_strike_is_exact() {
        let p = preset("heston-asian", &[]).unwrap();
        let cfg = SimConfig {
            horizon: 1.0,
            steps: 4,
            x0: p.x0.clone(),
            scheme: SchemeKind::ExtendedMilstein,
        };
        let pay = Payoff {
            kind: PayoffKind::AsianDigital,
            strike: 0.0,
            horizon: 1.0,
            scale: 100.0,
            average_coordinate: 2,
        };
        let r = estimate(&p.model, &cfg, &pay, &NoiseSpec::mc(3), 3000, &Exec::default()).unwrap();
        assert_eq!(r.mean, 100.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.paths_total, 3000);
    }

    #[test]
    fn far_strike_call_is_zero() {
        let (p, cfg) = bs_cfg(4, SchemeKind::EulerMaruyama);
        let pay = Payoff {
            kind: PayoffKind::AsianCall,
            strike: 1e6,
            horizon: 1.0,
            scale: (-0.1f64).exp(),
            average_coordinate: 1,
        };
        let r = estimate(&p.model, &cfg, &pay, &NoiseSpec::qmc(1, 4), 400, &Exec::default()).unwrap();
        assert_eq!((r.mean, r.stderr), (0.0, 0.0));
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let (p, cfg) = bs_cfg(8, SchemeKind::ExtendedMilstein);
        let fam = PayoffFamily::new(PayoffKind::AsianCall, vec![90.0, 100.0, 110.0], 1.0, 0.9, 1).unwrap();
        let one = estimate_family(&p.model, &cfg, &fam, &NoiseSpec::mc(5), 5000, &Exec::threads(1)).unwrap();
        let four = estimate_family(&p.model, &cfg, &fam, &NoiseSpec::mc(5), 5000, &Exec::threads(4)).unwrap();
        assert_eq!(one, four);
        let q1 = estimate_family(&p.model, &cfg, &fam, &NoiseSpec::qmc(5, 4), 4096, &Exec::threads(1)).unwrap();
        let q3 = estimate_family(&p.model, &cfg, &fam, &NoiseSpec::qmc(5, 4), 4096, &Exec::threads(3)).unwrap();
        assert_eq!(q1, q3);
    }

    #[test]
    fn budget_validation() {
        let (p, cfg) = bs_cfg(2, SchemeKind::EulerMaruyama);
        let pay = p.payoff.as_ref().unwrap();
        let fam = PayoffFamily::new(pay.kind, vec![100.0], 1.0, pay.scale, 1).unwrap();
        let e = Exec::default();
        assert!(estimate_family(&p.model, &cfg, &fam, &NoiseSpec::mc(1), 1, &e).is_err());
        assert!(estimate_family(&p.model, &cfg, &fam, &NoiseSpec::qmc(1, 4), 10, &e).is_err());
        assert!(estimate_family(&p.model, &cfg, &fam, &NoiseSpec::qmc(1, 1), 10, &e).is_err());
    }

    #[test]
    fn all_invalid_paths_fail_explicitly() {
        let model = SdeModel::builder("blowup", 1, 1)
            .drift(crate::model::Column::new(|x, o| o[0] = x[0] * x[0] * 1e200, |_, o| o[0] = 0.0, |_, o| o[0] = 0.0))
            .diffusion(crate::model::Column::new(|_, o| o[0] = 0.0, |_, o| o[0] = 0.0, |_, o| o[0] = 0.0))
            .build()
            .unwrap();
        let cfg = SimConfig {
            horizon: 1.0,
            steps: 4,
            x0: crate::StateVector(vec![1e200]),
            scheme: SchemeKind::EulerMaruyama,
        };
        let fam = PayoffFamily::new(PayoffKind::AsianCall, vec![1.0], 1.0, 1.0, 0).unwrap();
        let err = estimate_family(&model, &cfg, &fam, &NoiseSpec::mc(1), 10, &Exec::default()).unwrap_err();
        assert!(matches!(err, ExperimentError::AllPathsInvalid { paths: 10 }));
    }
}
