//! Strike sweeps across schemes and step counts.
//!
//! ```text
//! error_K(M, n) = benchmark_K − f_K(M, n)
//! sup-error(scheme, n) = max_K |error_K(M, n)|
//! ```
//!
//! For each `n` every scheme is run on the same [`NoiseSpec`], so path `p`
//! of scheme A and path `p` of scheme B see identical increments. The noise
//! audit of each run is compared across schemes and a mismatch aborts the
//! sweep.
//!
//! The standard error attached to a sup-error is the one at the maximizing
//! strike (estimate and benchmark reported separately).

use std::fmt::Write as _;

use crate::schemes::{SchemeKind, SimConfig};

use super::benchmark::{family_for, BenchmarkTable};
use super::estimator::{estimate_family, Exec, NoiseAudit, NoiseSpec};
use super::presets::PresetModel;
use super::ExperimentError;

pub const SWEEP_HEADER: &str = "scheme,n,K,M,estimate,stderr,benchmark,error";
pub const SUMMARY_HEADER: &str = "scheme,n,sup_error,K,estimate_stderr,benchmark_stderr";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub schemes: Vec<SchemeKind>,
    pub n_values: Vec<usize>,
    pub strikes: Vec<f64>,
    pub paths: usize,
    pub noise: NoiseSpec,
}

impl SweepConfig {
    pub const DEFAULT_N: [usize; 4] = [2, 4, 8, 16];
    pub const DESK_QMC_POINTS: usize = 100_000;
    pub const DESK_REPLICATIONS: u32 = 16;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub scheme: SchemeKind,
    pub n: usize,
    pub strike: f64,
    pub paths: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub benchmark: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupError {
    pub scheme: SchemeKind,
    pub n: usize,
    pub sup_error: f64,
    pub strike: f64,
    pub estimate_stderr: f64,
    pub benchmark_stderr: f64,
}

impl SupError {
    pub fn combined_stderr(&self) -> f64 {
        self.estimate_stderr.hypot(self.benchmark_stderr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunAudit {
    pub scheme: SchemeKind,
    pub n: usize,
    pub noise: NoiseAudit,
    pub paths_invalid: u64,
    pub negative_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SupError>,
    pub audits: Vec<RunAudit>,
}

/// Runs every `(n, scheme)` pair over all strikes against `bench`.
pub fn strike_sweep(
    preset: &PresetModel,
    cfg: &SweepConfig,
    bench: &BenchmarkTable,
    exec: &Exec,
) -> Result<SweepResult, ExperimentError> {
    if cfg.schemes.is_empty() || cfg.n_values.is_empty() {
        return Err(ExperimentError::InvalidParameter("a sweep needs at least one scheme and one n".into()));
    }
    let family = family_for(preset, cfg.strikes.clone())?;
    let bench_entries = cfg
        .strikes
        .iter()
        .map(|k| bench.require(*k).copied())
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut audits = Vec::new();
    for &n in &cfg.n_values {
        let mut reference: Option<NoiseAudit> = None;
        for &scheme in &cfg.schemes {
            let sim = SimConfig {
                horizon: preset.horizon,
                steps: n,
                x0: preset.x0.clone(),
                scheme,
            };
            let est = estimate_family(&preset.model, &sim, &family, &cfg.noise, cfg.paths, exec)?;
            match reference {
                None => reference = Some(est.audit),
                Some(r) if r != est.audit => return Err(ExperimentError::CrnViolation { n, scheme: scheme.name() }),
                Some(_) => {}
            }
            audits.push(RunAudit {
                scheme,
                n,
                noise: est.audit,
                paths_invalid: est.results[0].paths_invalid,
                negative_steps: est.negative_steps,
            });
            for ((k, r), b) in cfg.strikes.iter().zip(&est.results).zip(&bench_entries) {
                rows.push(SweepRow {
                    scheme,
                    n,
                    strike: *k,
                    paths: cfg.paths,
                    estimate: r.mean,
                    stderr: r.stderr,
                    benchmark: b.value,
                    error: b.value - r.mean,
                });
            }
        }
    }
    let summary = sup_errors(&rows, |k| bench.lookup(k).map_or(0.0, |e| e.stderr));
    Ok(SweepResult { rows, summary, audits })
}

/// Sup-over-strike errors per `(scheme, n)`, in first-appearance order.
pub fn sup_errors(rows: &[SweepRow], benchmark_stderr: impl Fn(f64) -> f64) -> Vec<SupError> {
    let mut out: Vec<SupError> = Vec::new();
    for r in rows {
        let candidate = SupError {
            scheme: r.scheme,
            n: r.n,
            sup_error: r.error.abs(),
            strike: r.strike,
            estimate_stderr: r.stderr,
            benchmark_stderr: benchmark_stderr(r.strike),
        };
        match out.iter_mut().find(|s| s.scheme == r.scheme && s.n == r.n) {
            Some(s) if candidate.sup_error > s.sup_error => *s = candidate,
            Some(_) => {}
            None => out.push(candidate),
        }
    }
    out
}

pub fn find_sup(summary: &[SupError], scheme: SchemeKind, n: usize) -> Option<&SupError> {
    summary.iter().find(|s| s.scheme == scheme && s.n == n)
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    pub fn summary_csv(&self) -> String {
        summary_to_csv(&self.summary)
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.scheme.name(),
            r.n,
            r.strike,
            r.paths,
            r.estimate,
            r.stderr,
            r.benchmark,
            r.error
        );
    }
    s
}

pub fn summary_to_csv(summary: &[SupError]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for e in summary {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.scheme.name(),
            e.n,
            e.sup_error,
            e.strike,
            e.estimate_stderr,
            e.benchmark_stderr
        );
    }
    s
}

fn csv_records<'a>(
    text: &'a str,
    header: &str,
    fields: usize,
) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)> + 'a, ExperimentError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => {
            return Err(ExperimentError::Csv {
                line: 1,
                message: format!("expected header {header}"),
            })
        }
    }
    let records: Vec<(usize, Vec<&str>)> = lines.map(|(i, l)| (i + 1, l.split(',').collect())).collect();
    if let Some((line, f)) = records.iter().find(|(_, f)| f.len() != fields) {
        return Err(ExperimentError::Csv {
            line: *line,
            message: format!("expected {fields} fields, got {}", f.len()),
        });
    }
    Ok(records.into_iter())
}

fn field<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, ExperimentError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| ExperimentError::Csv {
        line,
        message: format!("bad field '{s}': {e}"),
    })
}

fn scheme_field(line: usize, s: &str) -> Result<SchemeKind, ExperimentError> {
    s.parse().map_err(|e: crate::schemes::UnknownScheme| ExperimentError::Csv {
        line,
        message: e.to_string(),
    })
}

pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>, ExperimentError> {
    csv_records(text, SWEEP_HEADER, 8)?
        .map(|(line, f)| {
            Ok(SweepRow {
                scheme: scheme_field(line, f[0])?,
                n: field(line, f[1])?,
                strike: field(line, f[2])?,
                paths: field(line, f[3])?,
                estimate: field(line, f[4])?,
                stderr: field(line, f[5])?,
                benchmark: field(line, f[6])?,
                error: field(line, f[7])?,
            })
        })
        .collect()
}

pub fn summary_from_csv(text: &str) -> Result<Vec<SupError>, ExperimentError> {
    csv_records(text, SUMMARY_HEADER, 6)?
        .map(|(line, f)| {
            Ok(SupError {
                scheme: scheme_field(line, f[0])?,
                n: field(line, f[1])?,
                sup_error: field(line, f[2])?,
                strike: field(line, f[3])?,
                estimate_stderr: field(line, f[4])?,
                benchmark_stderr: field(line, f[5])?,
            })
        })
        .collect()
}
