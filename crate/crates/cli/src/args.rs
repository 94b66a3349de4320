//! Flag definitions and parsing helpers.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use extmil::experiments::PayoffKind;
use extmil::SchemeKind;

#[derive(Debug, Parser)]
#[command(name = "extmil", version, about = "Weak-error experiments for SDE discretization schemes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for all noise streams.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..=1024))]
    pub threads: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Randomized Sobol noise.
    #[arg(long, global = true, conflicts_with = "mc")]
    pub qmc: bool,
    /// Pseudo-random noise (the default).
    #[arg(long, global = true)]
    pub mc: bool,
    /// Use the large path and step budgets instead of the desk-scale ones.
    #[arg(long, global = true)]
    pub paper_scale: bool,
    /// Number of independent digital shifts for --qmc.
    #[arg(long, global = true, default_value_t = 16)]
    pub replications: u32,
    /// Directory of cached benchmark tables.
    #[arg(long, global = true, default_value = ".extmil-cache")]
    pub cache_dir: PathBuf,
    /// Compute (and cache) a missing Monte-Carlo benchmark instead of failing.
    #[arg(long, global = true)]
    pub make_benchmark: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate one payoff with one scheme.
    Price(PriceArgs),
    /// Strike sweep across schemes and step counts against a benchmark.
    Sweep(SweepArgs),
    /// Commutativity diagnosis and the commutator error coefficient.
    Check(CheckArgs),
    /// Fitted weak orders and extended/EM sup-error ratios.
    Convergence(ConvergenceArgs),
    /// Compute or load the Monte-Carlo benchmark table.
    Benchmark(BenchmarkArgs),
    /// Extended/EM error ratio across diffusion sizes on small-diffusion.
    Epsilon(EpsilonArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// bs-asian, heston-asian, gbm or small-diffusion.
    #[arg(long)]
    pub model: Option<String>,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "extended")]
    pub scheme: SchemeKind,
    /// asian-call or asian-digital (default: the model's payoff).
    #[arg(long)]
    pub payoff: Option<PayoffKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub strike: f64,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// Total paths M (default 10^5, or 10^5 per replication with --qmc).
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkChoice {
    /// Closed form when the model admits one, else Monte-Carlo.
    Auto,
    /// Always the cached Euler–Maruyama Monte-Carlo table.
    Mc,
    /// Closed form only.
    ClosedForm,
}

impl BenchmarkChoice {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkChoice::Auto => "auto",
            BenchmarkChoice::Mc => "mc",
            BenchmarkChoice::ClosedForm => "closed-form",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkBudget {
    /// Benchmark paths (default 10^6).
    #[arg(long)]
    pub bench_paths: Option<usize>,
    /// Benchmark steps (default 256).
    #[arg(long)]
    pub bench_steps: Option<usize>,
    /// Benchmark seed (default derived from --seed).
    #[arg(long)]
    pub bench_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "em,tmilstein,extended")]
    pub schemes: Vec<SchemeKind>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    pub n: Vec<usize>,
    /// `start:stop:step` (inclusive) or a comma list (default: the model's grid).
    #[arg(long, allow_hyphen_values = true)]
    pub strikes: Option<String>,
    /// Total paths M (default 10^5 per replication with --qmc, 10^6 with --mc).
    #[arg(long)]
    pub paths: Option<usize>,
    #[command(flatten)]
    pub budget: BenchmarkBudget,
    #[arg(long, value_enum, default_value_t = BenchmarkChoice::Auto)]
    pub benchmark: BenchmarkChoice,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extra random points around the initial state (0: the initial state only).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    /// A summary or sweep CSV; without it a sweep runs in-line.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub strikes: Option<String>,
    #[command(flatten)]
    pub budget: BenchmarkBudget,
}

#[derive(Debug, Clone, Args)]
pub struct EpsilonArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub strikes: Option<String>,
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Parses `start:stop:step` (inclusive) or `k1,k2,…`; every strike must be positive.
pub fn parse_strikes(text: &str) -> Result<Vec<f64>, String> {
    let strikes = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("--strikes '{text}': expected start:stop:step"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("--strikes '{text}': bad number '{s}'"));
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0 && step.is_finite()) || stop < start || !start.is_finite() || !stop.is_finite() {
            return Err(format!("--strikes '{text}': need start <= stop and a positive step"));
        }
        extmil::experiments::strike_grid(start, stop, step)
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("--strikes '{text}': bad number '{s}'")))
            .collect::<Result<Vec<_>, _>>()?
    };
    if let Some(k) = strikes.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(format!("--strikes: strike must be positive, got {k}"));
    }
    Ok(strikes)
}

/// Parses repeated `name=value` overrides.
pub fn parse_params(items: &[String]) -> Result<Vec<(String, f64)>, String> {
    items
        .iter()
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("--param '{item}': expected NAME=VALUE"))?;
            let v = v
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("--param '{item}': value is not a number"))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strike_syntax() {
        assert_eq!(parse_strikes("100:100:10").unwrap(), vec![100.0]);
        assert_eq!(parse_strikes("10:200:10").unwrap().len(), 20);
        assert_eq!(parse_strikes("90, 110").unwrap(), vec![90.0, 110.0]);
        assert!(parse_strikes("-5").is_err());
        assert!(parse_strikes("0:10:5").is_err());
        assert!(parse_strikes("10:5:1").is_err());
        assert!(parse_strikes("1:2").is_err());
    }

    #[test]
    fn param_syntax() {
        assert_eq!(parse_params(&["sigma=0.8".into()]).unwrap(), vec![("sigma".to_string(), 0.8)]);
        assert!(parse_params(&["sigma".into()]).is_err());
        assert!(parse_params(&["sigma=x".into()]).is_err());
    }
}
