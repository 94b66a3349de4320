//! Reference values per strike and their on-disk cache.
//!
//! The default benchmark is a high-resolution Euler–Maruyama Monte-Carlo
//! estimate. Two presets also admit closed forms, used where they apply:
//!
//! ```text
//! small-diffusion:  X_S(T) ~ N(m, s²),
//!                   m  = x_S + x_R (1 − e^{−T})
//!                   s² = ε² [T − 2(1 − e^{−T}) + (1 − e^{−2T})/2]
//!                   call    = (μ − K) Φ(δ) + ς φ(δ),  δ = (μ − K)/ς
//!                   digital = Φ(δ)
//!                   with μ = m/T, ς = s/T for the average X_S(T)/T
//! bs-asian, σ = 0:  A_T/T = (A_0 + S_0 (e^{rT} − 1)/r) / T
//! ```
//!
//! A cached table lives in `bench-<key>.csv`, where `<key>` is a SHA-256
//! prefix of the provenance (model, parameters, payoff, strikes, method,
//! seed, paths, steps). The first line is a `# provenance:` comment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::schemes::{SchemeKind, SimConfig};

use super::estimator::{estimate_family, Exec, NoiseSpec};
use super::payoff::{PayoffFamily, PayoffKind};
use super::presets::{PresetId, PresetModel};
use super::ExperimentError;

/// Budget of the Monte-Carlo benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkSpec {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub const DESK_PATHS: usize = 1_000_000;
    pub const DESK_STEPS: usize = 256;

    pub fn desk(seed: u64) -> Self {
        BenchmarkSpec {
            paths: Self::DESK_PATHS,
            steps: Self::DESK_STEPS,
            seed,
        }
    }

    /// The large budgets: 10⁷ paths, 2¹⁰ steps (2¹¹ for Heston).
    pub fn paper(seed: u64, id: PresetId) -> Self {
        BenchmarkSpec {
            paths: 10_000_000,
            steps: if id == PresetId::HestonAsian { 2048 } else { 1024 },
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkMethod {
    EmMonteCarlo,
    ClosedForm,
}

impl BenchmarkMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkMethod::EmMonteCarlo => "em-mc",
            BenchmarkMethod::ClosedForm => "closed-form",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub model: String,
    pub params: String,
    pub payoff: PayoffKind,
    pub strikes: Vec<f64>,
    pub method: BenchmarkMethod,
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
}

impl Provenance {
    pub fn params_hash(&self) -> String {
        hex_prefix(&Sha256::digest(self.params.as_bytes()), 16)
    }

    fn strikes_text(&self) -> String {
        self.strikes.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("|")
    }

    /// Cache key: model id + parameter hash, payoff, strikes, method, seed, M, n.
    pub fn key(&self) -> String {
        let text = format!(
            "model={};params={};payoff={};strikes={};method={};seed={};paths={};steps={}",
            self.model,
            self.params_hash(),
            self.payoff.name(),
            self.strikes_text(),
            self.method.name(),
            self.seed,
            self.paths,
            self.steps
        );
        hex_prefix(&Sha256::digest(text.as_bytes()), 16)
    }

    fn header_line(&self) -> String {
        format!(
            "# provenance: model={} params_hash={} params={} payoff={} method={} seed={} paths={} steps={} version={}",
            self.model,
            self.params_hash(),
            self.params,
            self.payoff.name(),
            self.method.name(),
            self.seed,
            self.paths,
            self.steps,
            env!("CARGO_PKG_VERSION")
        )
    }
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s.truncate(chars);
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkEntry {
    pub strike: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub provenance: Provenance,
    pub entries: Vec<BenchmarkEntry>,
}

impl BenchmarkTable {
    pub fn lookup(&self, strike: f64) -> Option<&BenchmarkEntry> {
        self.entries.iter().find(|e| e.strike == strike)
    }

    pub fn require(&self, strike: f64) -> Result<&BenchmarkEntry, ExperimentError> {
        self.lookup(strike).ok_or_else(|| ExperimentError::MissingBenchmark {
            strike,
            hint: format!("benchmark {} has no entry for this strike", self.provenance.key()),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.provenance.header_line();
        s.push_str("\nK,value,stderr\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{}", e.strike, e.value, e.stderr);
        }
        s
    }

    /// Parses the body of a cache file written by [`BenchmarkTable::to_csv`];
    /// the caller supplies the provenance it expects.
    pub fn parse_entries(text: &str) -> Result<Vec<BenchmarkEntry>, ExperimentError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
        match lines.next() {
            Some((_, "K,value,stderr")) => {}
            other => {
                return Err(ExperimentError::Csv {
                    line: other.map_or(0, |(i, _)| i + 1),
                    message: "expected header K,value,stderr".into(),
                })
            }
        }
        lines
            .map(|(i, line)| {
                let f: Vec<&str> = line.split(',').collect();
                let num = |s: &str| {
                    s.parse::<f64>().map_err(|e| ExperimentError::Csv {
                        line: i + 1,
                        message: format!("bad number '{s}': {e}"),
                    })
                };
                if f.len() != 3 {
                    return Err(ExperimentError::Csv {
                        line: i + 1,
                        message: format!("expected 3 fields, got {}", f.len()),
                    });
                }
                Ok(BenchmarkEntry {
                    strike: num(f[0])?,
                    value: num(f[1])?,
                    stderr: num(f[2])?,
                })
            })
            .collect()
    }
}

pub fn family_for(preset: &PresetModel, strikes: Vec<f64>) -> Result<PayoffFamily, ExperimentError> {
    let t = preset.payoff_template()?;
    PayoffFamily::new(t.kind, strikes, preset.horizon, t.scale, t.average_coordinate)
}

fn provenance(
    preset: &PresetModel,
    family: &PayoffFamily,
    method: BenchmarkMethod,
    spec: Option<BenchmarkSpec>,
) -> Provenance {
    let spec = spec.unwrap_or(BenchmarkSpec {
        paths: 0,
        steps: 0,
        seed: 0,
    });
    Provenance {
        model: preset.id.name().to_string(),
        params: preset.params.canonical(),
        payoff: family.kind,
        strikes: family.strikes.clone(),
        method,
        seed: spec.seed,
        paths: spec.paths,
        steps: spec.steps,
    }
}

/// Provenance of the Monte-Carlo benchmark for `(preset, family, spec)`.
pub fn mc_provenance(preset: &PresetModel, family: &PayoffFamily, spec: &BenchmarkSpec) -> Provenance {
    provenance(preset, family, BenchmarkMethod::EmMonteCarlo, Some(*spec))
}

/// High-resolution Euler–Maruyama pseudo-random Monte-Carlo values per strike.
pub fn benchmark(
    preset: &PresetModel,
    family: &PayoffFamily,
    spec: &BenchmarkSpec,
    exec: &Exec,
) -> Result<BenchmarkTable, ExperimentError> {
    let cfg = SimConfig {
        horizon: preset.horizon,
        steps: spec.steps,
        x0: preset.x0.clone(),
        scheme: SchemeKind::EulerMaruyama,
    };
    let est = estimate_family(&preset.model, &cfg, family, &NoiseSpec::mc(spec.seed), spec.paths, exec)?;
    let entries = est
        .strikes
        .iter()
        .zip(&est.results)
        .map(|(k, r)| BenchmarkEntry {
            strike: *k,
            value: r.mean,
            stderr: r.stderr,
        })
        .collect();
    Ok(BenchmarkTable {
        provenance: mc_provenance(preset, family, spec),
        entries,
    })
}

/// Exact values where the preset admits them: small-diffusion (Gaussian
/// slow coordinate) and zero-volatility bs-asian. `None` otherwise.
pub fn closed_form_benchmark(
    preset: &PresetModel,
    family: &PayoffFamily,
) -> Result<Option<BenchmarkTable>, ExperimentError> {
    let p = &preset.params;
    let t = preset.horizon;
    let (mu, sd) = match preset.id {
        PresetId::SmallDiffusion if family.average_coordinate == 1 => {
            let eps = p.get("eps");
            let e1 = 1.0 - (-t).exp();
            let e2 = 1.0 - (-2.0 * t).exp();
            let mean = p.get("xs0") + p.get("xr0") * e1;
            let var = eps * eps * (t - 2.0 * e1 + 0.5 * e2);
            (mean / t, var.max(0.0).sqrt() / t)
        }
        PresetId::BsAsian if p.get("sigma") == 0.0 && family.average_coordinate == 1 => {
            let r = p.get("r");
            let growth = if r == 0.0 { t } else { ((r * t).exp() - 1.0) / r };
            ((p.get("a0") + p.get("s0") * growth) / t, 0.0)
        }
        _ => return Ok(None),
    };
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let entries = family
        .strikes
        .iter()
        .map(|&k| {
            let raw = if sd == 0.0 {
                match family.kind {
                    PayoffKind::AsianCall => (mu - k).max(0.0),
                    PayoffKind::AsianDigital => f64::from(u8::from(mu >= k)),
                }
            } else {
                let d = (mu - k) / sd;
                match family.kind {
                    PayoffKind::AsianCall => (mu - k) * std_normal.cdf(d) + sd * std_normal.pdf(d),
                    PayoffKind::AsianDigital => std_normal.cdf(d),
                }
            };
            BenchmarkEntry {
                strike: k,
                value: family.scale * raw,
                stderr: 0.0,
            }
        })
        .collect();
    Ok(Some(BenchmarkTable {
        provenance: provenance(preset, family, BenchmarkMethod::ClosedForm, None),
        entries,
    }))
}

/// Directory of `bench-<key>.csv` files.
#[derive(Debug, Clone)]
pub struct BenchmarkCache {
    dir: PathBuf,
}

impl BenchmarkCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BenchmarkCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, provenance: &Provenance) -> PathBuf {
        self.dir.join(format!("bench-{}.csv", provenance.key()))
    }

    pub fn load(&self, provenance: &Provenance) -> Result<Option<BenchmarkTable>, ExperimentError> {
        let path = self.path_for(provenance);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ExperimentError::Io(format!("{}: {e}", path.display()))),
        };
        if text.lines().next() != Some(provenance.header_line().as_str()) {
            return Err(ExperimentError::Csv {
                line: 1,
                message: format!("{} has a provenance line that does not match its key", path.display()),
            });
        }
        let entries = BenchmarkTable::parse_entries(&text)?;
        Ok(Some(BenchmarkTable {
            provenance: provenance.clone(),
            entries,
        }))
    }

    pub fn store(&self, table: &BenchmarkTable) -> Result<PathBuf, ExperimentError> {
        let io = |e: std::io::Error| ExperimentError::Io(format!("{}: {e}", self.dir.display()));
        fs::create_dir_all(&self.dir).map_err(io)?;
        let path = self.path_for(&table.provenance);
        let tmp = path.with_extension("csv.tmp");
        fs::write(&tmp, table.to_csv()).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        Ok(path)
    }

    /// Returns the cached Monte-Carlo benchmark, computing and storing it
    /// when `compute_if_missing` is set.
    pub fn get_or_compute(
        &self,
        preset: &PresetModel,
        family: &PayoffFamily,
        spec: &BenchmarkSpec,
        exec: &Exec,
        compute_if_missing: bool,
    ) -> Result<BenchmarkTable, ExperimentError> {
        let prov = mc_provenance(preset, family, spec);
        if let Some(table) = self.load(&prov)? {
            return Ok(table);
        }
        if !compute_if_missing {
            return Err(ExperimentError::MissingBenchmark {
                strike: family.strikes[0],
                hint: format!(
                    "no cached benchmark {} in {}; rerun with --make-benchmark or run the benchmark command first",
                    self.path_for(&prov).display(),
                    self.dir.display()
                ),
            });
        }
        let table = benchmark(preset, family, spec, exec)?;
        self.store(&table)?;
        Ok(table)
    }
}
