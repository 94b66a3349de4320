//! Command implementations. Every command resolves and validates all of its
//! flags first (usage errors, exit 2) and only then computes (runtime
//! errors, exit 1); output files are written last, so a failing run never
//! leaves partial outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Parser;
use extmil::experiments::benchmark::family_for;
use extmil::experiments::convergence::{orders_by_scheme, ratio_table};
use extmil::experiments::sweep::{rows_from_csv, summary_from_csv, sup_errors, SUMMARY_HEADER, SWEEP_HEADER};
use extmil::experiments::{
    closed_form_benchmark, epsilon_study, estimate, preset, BenchmarkCache, BenchmarkSpec, BenchmarkTable,
    EpsilonConfig, Exec, NoiseSpec, Payoff, PresetModel, SupError, SweepConfig,
};
use extmil::model::COMMUTATIVITY_TOLERANCE;
use extmil::{NoiseSource, SchemeKind, SimConfig, StateVector};

use crate::args::{
    parse_params, parse_strikes, BenchmarkArgs, BenchmarkBudget, BenchmarkChoice, CheckArgs, Cli, Command,
    ConvergenceArgs, EpsilonArgs, GlobalArgs, ModelArgs, PriceArgs, SweepArgs,
};
use crate::manifest::Manifest;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<extmil::experiments::ExperimentError> for CliError {
    fn from(e: extmil::experiments::ExperimentError) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Offset between the sweep seed and the default benchmark seed, so the
/// benchmark never shares increments with the runs it judges.
const BENCH_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

const DESK_POINTS_PER_REPLICATION: usize = 100_000;
const PAPER_POINTS_PER_REPLICATION: usize = 1_000_000;

pub fn run(cli: Cli) -> CliResult<()> {
    let g = cli.global;
    match cli.command {
        Command::Price(a) => price(&g, &a),
        Command::Sweep(a) => sweep(&g, &a),
        Command::Check(a) => check(&g, &a),
        Command::Convergence(a) => convergence(&g, &a),
        Command::Benchmark(a) => benchmark(&g, &a),
        Command::Epsilon(a) => epsilon(&g, &a),
        Command::Replay(a) => replay(&g, &a.manifest),
    }
}

fn exec(g: &GlobalArgs) -> Exec {
    Exec {
        threads: g.threads.map(|t| t as usize),
    }
}

fn noise(g: &GlobalArgs) -> CliResult<NoiseSpec> {
    if g.qmc {
        if g.replications < 2 {
            return Err(usage("--replications must be at least 2 with --qmc"));
        }
        Ok(NoiseSpec::qmc(g.seed, g.replications))
    } else {
        Ok(NoiseSpec::mc(g.seed))
    }
}

/// Total path budget: `explicit`, else 10^5 (10^6) points per replication
/// for QMC, else `mc_desk` (×10 at paper scale) for MC.
fn resolve_paths(g: &GlobalArgs, spec: &NoiseSpec, explicit: Option<usize>, mc_desk: usize) -> CliResult<usize> {
    let m = explicit.unwrap_or(match (g.qmc, g.paper_scale) {
        (true, false) => DESK_POINTS_PER_REPLICATION * g.replications as usize,
        (true, true) => PAPER_POINTS_PER_REPLICATION * g.replications as usize,
        (false, false) => mc_desk,
        (false, true) => mc_desk * 10,
    });
    spec.paths_per_replication(m).map_err(|e| usage(format!("--paths: {e}")))?;
    Ok(m)
}

fn load_preset(m: &ModelArgs) -> CliResult<PresetModel> {
    let id = m.model.as_deref().ok_or_else(|| usage("--model is required"))?;
    let overrides = parse_params(&m.params).map_err(usage)?;
    preset(id, &overrides).map_err(|e| usage(format!("--model {id}: {e}")))
}

fn model_manifest(command: &str, g: &GlobalArgs, p: &PresetModel) -> Manifest {
    let mut m = Manifest::new(command);
    m.set("model", p.id.name());
    for (k, v) in p.params.iter() {
        m.set(&format!("param.{k}"), v);
    }
    m.set("seed", g.seed);
    m.set("noise", if g.qmc { "qmc" } else { "mc" });
    m.set("replications", g.replications);
    m.set("cache_dir", g.cache_dir.display());
    m.set("paper_scale", g.paper_scale);
    m.set("threads", g.threads.map_or("auto".to_string(), |t| t.to_string()));
    m
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Rounds to 11 significant digits for display, so `1.5937500000000002`
/// prints as `1.59375`.
fn short(v: f64) -> String {
    let rounded: f64 = format!("{v:.10e}").parse().unwrap_or(v);
    rounded.to_string()
}

struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Writes every file, then the manifest listing them.
    fn write(self, manifest: &mut Manifest, manifest_name: &str) -> CliResult<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let names: Vec<&str> = self.files.iter().map(|(n, _)| n.as_str()).collect();
        manifest.set("out", self.dir.display());
        manifest.set("outputs", names.join(","));
        for (name, contents) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        let path = self.dir.join(manifest_name);
        fs::write(&path, manifest.render()).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

fn price(g: &GlobalArgs, a: &PriceArgs) -> CliResult<()> {
    let p = load_preset(&a.model)?;
    let template = p.payoff_template().map_err(|e| usage(e.to_string()))?;
    if !(a.strike > 0.0 && a.strike.is_finite()) {
        return Err(usage(format!("--strike must be positive, got {}", a.strike)));
    }
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let spec = noise(g)?;
    let m = resolve_paths(g, &spec, a.paths, 100_000)?;
    let payoff = Payoff {
        kind: a.payoff.unwrap_or(template.kind),
        strike: a.strike,
        horizon: p.horizon,
        scale: template.scale,
        average_coordinate: template.average_coordinate,
    };
    let cfg = SimConfig {
        horizon: p.horizon,
        steps: a.n,
        x0: p.x0.clone(),
        scheme: a.scheme,
    };

    let r = estimate(&p.model, &cfg, &payoff, &spec, m, &exec(g))?;
    println!("{} ± {}", r.mean, r.stderr);
    println!(
        "model {} scheme {} payoff {} K {} n {} M {} noise {} invalid paths {}",
        p.id.name(),
        a.scheme,
        payoff.kind,
        a.strike,
        a.n,
        m,
        spec.kind.name(),
        r.paths_invalid
    );
    if let Some(dir) = &g.out {
        let mut manifest = model_manifest("price", g, &p);
        manifest.set("scheme", a.scheme);
        manifest.set("payoff", payoff.kind);
        manifest.set("strike", a.strike);
        manifest.set("n", a.n);
        manifest.set("paths", m);
        let mut out = Outputs::new(dir);
        out.add(
            "price.csv",
            format!(
                "scheme,n,K,M,estimate,stderr,paths_invalid\n{},{},{},{},{},{},{}\n",
                a.scheme, a.n, a.strike, m, r.mean, r.stderr, r.paths_invalid
            ),
        );
        out.write(&mut manifest, "price.manifest")?;
    }
    Ok(())
}

fn resolve_strikes(text: Option<&str>, p: &PresetModel) -> CliResult<Vec<f64>> {
    match text {
        Some(t) => parse_strikes(t).map_err(usage),
        None if p.default_strikes.is_empty() => Err(usage(format!("--strikes is required for {}", p.id.name()))),
        None => Ok(p.default_strikes.clone()),
    }
}

fn resolve_budget(g: &GlobalArgs, b: &BenchmarkBudget, p: &PresetModel) -> CliResult<BenchmarkSpec> {
    let base = if g.paper_scale {
        BenchmarkSpec::paper(g.seed, p.id)
    } else {
        BenchmarkSpec::desk(g.seed)
    };
    let spec = BenchmarkSpec {
        paths: b.bench_paths.unwrap_or(base.paths),
        steps: b.bench_steps.unwrap_or(base.steps),
        seed: b.bench_seed.unwrap_or(g.seed.wrapping_add(BENCH_SEED_OFFSET)),
    };
    if spec.paths < 2 || spec.steps == 0 {
        return Err(usage("--bench-paths must be at least 2 and --bench-steps positive"));
    }
    Ok(spec)
}

struct SweepPlan {
    preset: PresetModel,
    cfg: SweepConfig,
    choice: BenchmarkChoice,
    bench: BenchmarkSpec,
}

fn plan_sweep(g: &GlobalArgs, a: &SweepArgs) -> CliResult<SweepPlan> {
    let p = load_preset(&a.model)?;
    p.payoff_template().map_err(|e| usage(e.to_string()))?;
    let strikes = resolve_strikes(a.strikes.as_deref(), &p)?;
    if a.n.contains(&0) {
        return Err(usage("--n values must be positive"));
    }
    if a.schemes.is_empty() || a.n.is_empty() {
        return Err(usage("--schemes and --n must not be empty"));
    }
    let spec = noise(g)?;
    let paths = resolve_paths(g, &spec, a.paths, 1_000_000)?;
    let bench = resolve_budget(g, &a.budget, &p)?;
    let family = family_for(&p, strikes.clone()).map_err(|e| usage(e.to_string()))?;
    if a.benchmark == BenchmarkChoice::ClosedForm && closed_form_benchmark(&p, &family)?.is_none() {
        return Err(usage(format!("--benchmark closed-form: no closed form for {}", p.id.name())));
    }
    Ok(SweepPlan {
        cfg: SweepConfig {
            schemes: a.schemes.clone(),
            n_values: a.n.clone(),
            strikes,
            paths,
            noise: spec,
        },
        preset: p,
        choice: a.benchmark,
        bench,
    })
}

fn sweep_manifest(command: &str, g: &GlobalArgs, plan: &SweepPlan) -> Manifest {
    let mut m = model_manifest(command, g, &plan.preset);
    m.set("schemes", join(&plan.cfg.schemes));
    m.set("n", join(&plan.cfg.n_values));
    m.set("strikes", join(&plan.cfg.strikes));
    m.set("paths", plan.cfg.paths);
    m.set("benchmark", plan.choice.name());
    m.set("bench_paths", plan.bench.paths);
    m.set("bench_steps", plan.bench.steps);
    m.set("bench_seed", plan.bench.seed);
    m.set("make_benchmark", g.make_benchmark);
    m
}

fn obtain_benchmark(g: &GlobalArgs, plan: &SweepPlan) -> CliResult<BenchmarkTable> {
    let family = family_for(&plan.preset, plan.cfg.strikes.clone())?;
    if plan.choice != BenchmarkChoice::Mc {
        if let Some(t) = closed_form_benchmark(&plan.preset, &family)? {
            eprintln!("benchmark: closed form");
            return Ok(t);
        }
    }
    let cache = BenchmarkCache::new(&g.cache_dir);
    let table = cache.get_or_compute(&plan.preset, &family, &plan.bench, &exec(g), g.make_benchmark)?;
    eprintln!("benchmark: {}", cache.path_for(&table.provenance).display());
    Ok(table)
}

fn print_summary(summary: &[SupError]) {
    println!("scheme     n  sup_error      at K     stderr(est)  stderr(bench)");
    for s in summary {
        println!(
            "{:<9} {:>3}  {:<13} {:<8} {:<12} {}",
            s.scheme.name(),
            s.n,
            short(s.sup_error),
            s.strike,
            short(s.estimate_stderr),
            short(s.benchmark_stderr)
        );
    }
}

fn run_sweep(g: &GlobalArgs, plan: &SweepPlan) -> CliResult<extmil::experiments::SweepResult> {
    let bench = obtain_benchmark(g, plan)?;
    let result = extmil::experiments::strike_sweep(&plan.preset, &plan.cfg, &bench, &exec(g))?;
    for a in &result.audits {
        if a.paths_invalid > 0 || a.negative_steps > 0 {
            eprintln!(
                "note: {} n={}: {} invalid paths, {} steps with negative variance",
                a.scheme, a.n, a.paths_invalid, a.negative_steps
            );
        }
    }
    Ok(result)
}

fn sweep(g: &GlobalArgs, a: &SweepArgs) -> CliResult<()> {
    let plan = plan_sweep(g, a)?;
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let result = run_sweep(g, &plan)?;
    print_summary(&result.summary);
    let mut manifest = sweep_manifest("sweep", g, &plan);
    let mut out = Outputs::new(&dir);
    out.add("sweep.csv", result.to_csv());
    out.add("summary.csv", result.summary_csv());
    out.write(&mut manifest, "sweep.manifest")
}

fn convergence(g: &GlobalArgs, a: &ConvergenceArgs) -> CliResult<()> {
    let (summary, mut manifest) = match &a.input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("--input {}: {e}", path.display())))?;
            let summary = match text.lines().next() {
                Some(SUMMARY_HEADER) => summary_from_csv(&text)?,
                Some(SWEEP_HEADER) => sup_errors(&rows_from_csv(&text)?, |_| 0.0),
                _ => return Err(usage(format!("--input {}: not a sweep or summary CSV", path.display()))),
            };
            let mut m = Manifest::new("convergence");
            m.set("input", path.display());
            (summary, m)
        }
        None => {
            let plan = plan_sweep(g, &a.sweep)?;
            let result = run_sweep(g, &plan)?;
            (result.summary, sweep_manifest("convergence", g, &plan))
        }
    };
    print_summary(&summary);
    let mut orders = String::from("scheme,order,slope,intercept,points_used,points_excluded\n");
    for (scheme, fit) in orders_by_scheme(&summary) {
        match fit {
            Ok(f) => {
                println!(
                    "{scheme}: weak order {} (slope {}, intercept {}, {} points, {} excluded)",
                    short(f.order()),
                    short(f.slope),
                    short(f.intercept),
                    f.used,
                    f.excluded
                );
                let _ = writeln!(orders, "{scheme},{},{},{},{},{}", f.order(), f.slope, f.intercept, f.used, f.excluded);
            }
            Err(e) => println!("{scheme}: no fit ({e})"),
        }
    }
    let ratios = ratio_table(&summary, SchemeKind::ExtendedMilstein, SchemeKind::EulerMaruyama);
    let mut ratio_csv = String::from("n,ratio,stderr\n");
    if !ratios.is_empty() {
        println!("extended/em sup-error ratio:");
        for r in &ratios {
            println!("  n={:<4} {} ± {}", r.n, short(r.ratio), short(r.stderr));
            let _ = writeln!(ratio_csv, "{},{},{}", r.n, r.ratio, r.stderr);
        }
    }
    if let Some(dir) = &g.out {
        let mut out = Outputs::new(dir);
        out.add("orders.csv", orders);
        out.add("ratios.csv", ratio_csv);
        out.write(&mut manifest, "convergence.manifest")?;
    }
    Ok(())
}

fn check(g: &GlobalArgs, a: &CheckArgs) -> CliResult<()> {
    let p = load_preset(&a.model)?;
    let n = p.model.state_dim();
    let mut points = vec![p.x0.clone()];
    let src = NoiseSource::pseudo_random(g.seed, n);
    let mut u = vec![0.0; n];
    for i in 0..a.samples {
        src.fill_uniforms(i as u64, &mut u).map_err(anyhow::Error::from)?;
        let x = p
            .x0
            .0
            .iter()
            .zip(&u)
            .map(|(x, u)| if *x == 0.0 { 2.0 * u - 1.0 } else { x * (0.5 + u) })
            .collect();
        points.push(StateVector(x));
    }
    let report = p
        .model
        .commutativity_check(&points, COMMUTATIVITY_TOLERANCE)
        .map_err(anyhow::Error::from)?;
    let mut phi3_max: f64 = 0.0;
    for x in &points {
        phi3_max = phi3_max.max(p.model.phi3_coefficients(x.as_slice()).map_err(anyhow::Error::from)?.max_abs());
    }
    println!(
        "model {} (state dim {}, noise dim {}), {} sample point(s); admissible region: {}",
        p.id.name(),
        n,
        p.model.noise_dim(),
        report.sample_count,
        p.admissible_region()
    );
    println!(
        "commutative: {}, max defect: {} at {}, phi3 max: {}",
        report.commutative,
        short(report.max_defect),
        report.witness_point,
        short(phi3_max)
    );
    Ok(())
}

fn benchmark(g: &GlobalArgs, a: &BenchmarkArgs) -> CliResult<()> {
    let p = load_preset(&a.model)?;
    p.payoff_template().map_err(|e| usage(e.to_string()))?;
    let strikes = resolve_strikes(a.strikes.as_deref(), &p)?;
    let spec = resolve_budget(g, &a.budget, &p)?;
    let family = family_for(&p, strikes).map_err(|e| usage(e.to_string()))?;
    let cache = BenchmarkCache::new(&g.cache_dir);
    let table = cache.get_or_compute(&p, &family, &spec, &exec(g), true)?;
    println!("K,value,stderr");
    for e in &table.entries {
        println!("{},{},{}", e.strike, e.value, e.stderr);
    }
    eprintln!("cached at {}", cache.path_for(&table.provenance).display());
    if let Some(t) = closed_form_benchmark(&p, &family)? {
        let worst = t
            .entries
            .iter()
            .zip(&table.entries)
            .map(|(c, m)| (c.value - m.value).abs())
            .fold(0.0, f64::max);
        println!("closed form available; max |closed form - MC| = {}", short(worst));
    }
    if let Some(dir) = &g.out {
        let mut manifest = model_manifest("benchmark", g, &p);
        manifest.set("strikes", join(&family.strikes));
        manifest.set("bench_paths", spec.paths);
        manifest.set("bench_steps", spec.steps);
        manifest.set("bench_seed", spec.seed);
        let mut out = Outputs::new(dir);
        out.add("benchmark.csv", table.to_csv());
        out.write(&mut manifest, "benchmark.manifest")?;
    }
    Ok(())
}

fn epsilon(g: &GlobalArgs, a: &EpsilonArgs) -> CliResult<()> {
    let base = preset("small-diffusion", &[]).map_err(|e| usage(e.to_string()))?;
    if let Some(e) = a.eps.iter().find(|e| !(0.0..1.0).contains(*e)) {
        return Err(usage(format!("--eps values must lie in [0, 1), got {e}")));
    }
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let strikes = resolve_strikes(a.strikes.as_deref(), &base)?;
    let spec = noise(g)?;
    let paths = resolve_paths(g, &spec, a.paths, 1_000_000)?;
    let cfg = EpsilonConfig {
        eps_values: a.eps.clone(),
        steps: a.n,
        strikes,
        paths,
        noise: spec,
    };
    let rows = epsilon_study(&cfg, &exec(g))?;
    let mut csv = String::from("eps,ratio,ratio_stderr,em,tmilstein,extended\n");
    println!("eps      ratio(extended/em)  ± stderr     sup-errors em / tmilstein / extended");
    for r in &rows {
        let sup = |k: SchemeKind| r.sup.iter().find(|s| s.scheme == k).map_or(f64::NAN, |s| s.sup_error);
        let (em, tm, ext) = (
            sup(SchemeKind::EulerMaruyama),
            sup(SchemeKind::TruncatedMilstein),
            sup(SchemeKind::ExtendedMilstein),
        );
        println!(
            "{:<8} {:<19} {:<12} {} / {} / {}",
            r.eps,
            short(r.ratio),
            short(r.ratio_stderr),
            short(em),
            short(tm),
            short(ext)
        );
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.eps, r.ratio, r.ratio_stderr, em, tm, ext);
    }
    if let Some(dir) = &g.out {
        let mut manifest = Manifest::new("epsilon");
        manifest.set("eps", join(&cfg.eps_values));
        manifest.set("n", cfg.steps);
        manifest.set("strikes", join(&cfg.strikes));
        manifest.set("paths", cfg.paths);
        manifest.set("seed", g.seed);
        manifest.set("noise", if g.qmc { "qmc" } else { "mc" });
        manifest.set("replications", g.replications);
        let mut out = Outputs::new(dir);
        out.add("epsilon.csv", csv);
        out.write(&mut manifest, "epsilon.manifest")?;
    }
    Ok(())
}

/// Re-runs a manifest; `--threads` and `--out` given to `replay` override
/// the recorded ones.
fn replay(g: &GlobalArgs, path: &Path) -> CliResult<()> {
    let manifest = Manifest::load(path).map_err(|e| usage(e.to_string()))?;
    if manifest.get("command") == Some("replay") {
        return Err(usage("a manifest cannot replay another replay"));
    }
    let mut argv = vec!["extmil".to_string()];
    argv.extend(manifest.to_args().map_err(|e| usage(e.to_string()))?);
    if let Some(t) = g.threads {
        argv.extend(["--threads".into(), t.to_string()]);
    }
    match (&g.out, manifest.get("out")) {
        (Some(dir), _) => argv.extend(["--out".into(), dir.display().to_string()]),
        (None, Some(dir)) => argv.extend(["--out".into(), dir.to_string()]),
        (None, None) => {}
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| usage(format!("manifest {}: {e}", path.display())))?;
    run(cli)
}
