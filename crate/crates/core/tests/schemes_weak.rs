//! One-step expectations, Milstein equivalences and zero-volatility limits.

use extmil::experiments::{benchmark, closed_form_benchmark, estimate, family_for, preset, BenchmarkSpec, Exec, NoiseSpec};
use extmil::model::Column;
use extmil::schemes::{step_em, step_extended_milstein, step_truncated_milstein, StepInput};
use extmil::{SchemeKind, SdeModel, SimConfig};

fn gbm(r: f64, sigma: f64) -> SdeModel {
    preset("gbm", &[("r".into(), r), ("sigma".into(), sigma)]).unwrap().model
}

/// Each step is a quadratic polynomial in `dB`, so three-point
/// Gauss–Hermite quadrature gives its exact expectation.
fn expected_step(model: &SdeModel, kind: SchemeKind, x: f64, h: f64) -> f64 {
    let node = (3.0 * h).sqrt();
    let f = |db: f64| {
        let input = StepInput { x: &[x], h, db: &[db] };
        let out = match kind {
            SchemeKind::EulerMaruyama => step_em(model, &input),
            SchemeKind::TruncatedMilstein => step_truncated_milstein(model, &input),
            SchemeKind::ExtendedMilstein => step_extended_milstein(model, &input),
        };
        out.unwrap().0[0]
    };
    2.0 / 3.0 * f(0.0) + (f(node) + f(-node)) / 6.0
}

#[test]
fn step_expectations_on_gbm() {
    let m = gbm(0.1, 0.2);
    let (x, h) = (100.0, 0.5);
    assert!((expected_step(&m, SchemeKind::EulerMaruyama, x, h) - 105.0).abs() < 1e-10);
    assert!((expected_step(&m, SchemeKind::TruncatedMilstein, x, h) - 105.0).abs() < 1e-10);
    assert!((expected_step(&m, SchemeKind::ExtendedMilstein, x, h) - 105.125).abs() < 1e-10);
}

#[test]
fn driftless_gbm_stays_a_martingale() {
    let m = gbm(0.0, 0.3);
    for kind in SchemeKind::ALL {
        for x in [1.0, 50.0, 100.0] {
            assert!((expected_step(&m, kind, x, 0.25) - x).abs() < 1e-12 * x, "{kind} at {x}");
        }
    }
}

#[test]
fn oracle_step_values() {
    let m = gbm(0.1, 0.2);
    let input = StepInput { x: &[100.0], h: 0.5, db: &[0.1] };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b;
    assert!(close(step_em(&m, &input).unwrap().0[0], 107.0));
    assert!(close(step_truncated_milstein(&m, &input).unwrap().0[0], 106.02));
    assert!(close(step_extended_milstein(&m, &input).unwrap().0[0], 106.245));
}

/// Two commuting noises acting on a scalar: the full Milstein step with
/// arbitrary Lévy area equals the truncated one.
#[test]
fn levy_area_drops_out_when_fields_commute() {
    let (a, b, r) = (0.3, 0.2, 0.05);
    let model = SdeModel::builder("two-noise-gbm", 1, 2)
        .drift(Column::new(move |x, o| o[0] = r * x[0], move |_, o| o[0] = r, |_, o| o[0] = 0.0))
        .diffusion(Column::new(move |x, o| o[0] = a * x[0], move |_, o| o[0] = a, |_, o| o[0] = 0.0))
        .diffusion(Column::new(move |x, o| o[0] = b * x[0], move |_, o| o[0] = b, |_, o| o[0] = 0.0))
        .build()
        .unwrap();
    let (x, h) = (80.0, 0.1);
    for (db1, db2, area) in [(0.1, -0.2, 0.37), (-0.05, 0.3, -1.2), (0.0, 0.0, 5.0)] {
        let sig = [a, b];
        let db = [db1, db2];
        let mut milstein = x + r * x * h + a * x * db1 + b * x * db2;
        for j1 in 0..2 {
            for j2 in 0..2 {
                let g = sig[j1] * sig[j2] * x;
                let iterated = if j1 == j2 {
                    0.5 * (db[j1] * db[j1] - h)
                } else if j1 < j2 {
                    0.5 * db1 * db2 + area
                } else {
                    0.5 * db1 * db2 - area
                };
                milstein += g * iterated;
            }
        }
        let t = step_truncated_milstein(&model, &StepInput { x: &[x], h, db: &db }).unwrap().0[0];
        assert!((t - milstein).abs() < 1e-12 * x, "{t} vs {milstein}");
    }
}

#[test]
fn zero_volatility_asian_limit() {
    let p = preset("bs-asian", &[("sigma".into(), 0.0)]).unwrap();
    let fam = family_for(&p, vec![100.0]).unwrap();
    let exact = closed_form_benchmark(&p, &fam).unwrap().unwrap().entries[0].value;
    let payoff = fam.single(0);
    let run = |scheme, steps| {
        let cfg = SimConfig {
            horizon: 1.0,
            steps,
            x0: p.x0.clone(),
            scheme,
        };
        estimate(&p.model, &cfg, &payoff, &NoiseSpec::mc(1), 2, &Exec::default()).unwrap()
    };
    let ext = run(SchemeKind::ExtendedMilstein, 256);
    assert!((ext.mean - exact).abs() < 1e-3, "{} vs {exact}", ext.mean);
    assert_eq!(ext.stderr, 0.0);
    for scheme in [SchemeKind::EulerMaruyama, SchemeKind::TruncatedMilstein] {
        // First-order rectangle rule on the running integral: ≈0.02 at n = 256.
        assert!((run(scheme, 256).mean - exact).abs() > 1e-2);
        assert!((run(scheme, 1 << 15).mean - exact).abs() < 1e-3);
    }
    let bench = benchmark(
        &p,
        &fam,
        &BenchmarkSpec {
            paths: 2,
            steps: 1 << 15,
            seed: 1,
        },
        &Exec::default(),
    )
    .unwrap();
    assert!((bench.entries[0].value - exact).abs() < 1e-3);
}

#[test]
fn additive_noise_makes_em_and_truncated_milstein_agree() {
    let p = preset("small-diffusion", &[("eps".into(), 0.3)]).unwrap();
    let fam = family_for(&p, vec![0.4, 0.6, 0.8]).unwrap();
    let run = |scheme| {
        let cfg = SimConfig {
            horizon: 1.0,
            steps: 8,
            x0: p.x0.clone(),
            scheme,
        };
        extmil::experiments::estimate_family(&p.model, &cfg, &fam, &NoiseSpec::qmc(4, 4), 4096, &Exec::default()).unwrap()
    };
    assert_eq!(run(SchemeKind::EulerMaruyama).results, run(SchemeKind::TruncatedMilstein).results);
}
