//! Statistical behaviour of the increment sources and the estimators built
//! on them.

use extmil::experiments::{estimate_family, family_for, preset, Exec, NoiseSpec};
use extmil::noise::{sobol, SobolSequence};
use extmil::{NoiseSource, SchemeKind, SimConfig};

#[test]
fn pseudo_random_increments_have_the_right_moments() {
    let (paths, n, d, h) = (20_000u64, 4, 2, 0.25);
    let src = NoiseSource::pseudo_random(17, n * d);
    let mut sum = vec![0.0; n * d];
    let mut sq = vec![0.0; n * d];
    let mut cross = 0.0;
    for p in 0..paths {
        let z = src.gaussian_increments(p, n, d, h).unwrap();
        for (i, v) in z.iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
        cross += z[0] * z[1];
    }
    let m = paths as f64;
    // Mean: sd of the sample mean is √(h/M) ≈ 0.0035.
    assert!(sum.iter().all(|s| (s / m).abs() < 4.0 * (h / m).sqrt()));
    // Variance: sd of the sample variance is h√(2/M) ≈ 0.0025.
    assert!(sq.iter().all(|s| (s / m - h).abs() < 4.0 * h * (2.0 / m).sqrt()));
    assert!((cross / m).abs() < 4.0 * h / m.sqrt());
}

#[test]
fn shifted_sobol_keeps_two_dimensional_stratification() {
    // Dimensions 1–2 of Sobol form a (0, m, 2)-net: after any digital shift
    // every 1/64 × 1/64 cell holds exactly one of the first 4096 points.
    for rep in 0..3 {
        let src = NoiseSource::randomized_sobol(5, 2, rep).unwrap();
        let mut counts = vec![0u32; 64 * 64];
        let mut u = [0.0; 2];
        for p in 0..4096 {
            src.fill_uniforms(p, &mut u).unwrap();
            counts[(u[0] * 64.0) as usize * 64 + (u[1] * 64.0) as usize] += 1;
        }
        assert!(counts.iter().all(|c| *c == 1), "replication {rep}");
    }
}

#[test]
fn sobol_one_dimensional_discrepancy_is_small() {
    let seq = SobolSequence::new(8).unwrap();
    let mut raw = [0u32; 8];
    let m = 1 << 10;
    let mut cols: Vec<Vec<f64>> = (0..8).map(|_| Vec::with_capacity(m)).collect();
    for i in 0..m as u32 {
        seq.point(i, &mut raw);
        for (c, x) in cols.iter_mut().zip(raw) {
            c.push(sobol::to_unit(x));
        }
    }
    for c in &mut cols {
        c.sort_by(f64::total_cmp);
        let star = c
            .iter()
            .enumerate()
            .map(|(i, x)| ((i + 1) as f64 / m as f64 - x).abs().max((x - i as f64 / m as f64).abs()))
            .fold(0.0, f64::max);
        assert!(star <= 1.0 / m as f64 + 1e-9, "star discrepancy {star}");
    }
}

#[test]
fn qmc_and_mc_agree_within_error_bars() {
    let p = preset("bs-asian", &[]).unwrap();
    let fam = family_for(&p, vec![90.0, 100.0, 110.0]).unwrap();
    let cfg = SimConfig {
        horizon: 1.0,
        steps: 8,
        x0: p.x0.clone(),
        scheme: SchemeKind::ExtendedMilstein,
    };
    let exec = Exec::default();
    let q = estimate_family(&p.model, &cfg, &fam, &NoiseSpec::qmc(2, 8), 8 * 4096, &exec).unwrap();
    let m = estimate_family(&p.model, &cfg, &fam, &NoiseSpec::mc(2), 40_000, &exec).unwrap();
    for (a, b) in q.results.iter().zip(&m.results) {
        let combined = a.stderr.hypot(b.stderr);
        assert!((a.mean - b.mean).abs() < 4.0 * combined, "{a:?} vs {b:?}");
        // Randomized QMC should beat plain MC at a similar budget.
        assert!(a.stderr < b.stderr);
    }
}

#[test]
fn scheme_toggle_leaves_noise_untouched() {
    let p = preset("heston-asian", &[]).unwrap();
    let fam = family_for(&p, vec![100.0]).unwrap();
    let audits: Vec<_> = SchemeKind::ALL
        .iter()
        .map(|&scheme| {
            let cfg = SimConfig {
                horizon: 1.0,
                steps: 4,
                x0: p.x0.clone(),
                scheme,
            };
            estimate_family(&p.model, &cfg, &fam, &NoiseSpec::mc(8), 3000, &Exec::threads(2)).unwrap().audit
        })
        .collect();
    assert!(audits.iter().all(|a| *a == audits[0]));
    assert_eq!(audits[0].draws, 3000 * 4 * 2);
}
