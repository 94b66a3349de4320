//! Small-noise study on the `small-diffusion` preset.
//!
//! For a diffusion of size ε the leading weak-error coefficient of the
//! extended scheme scales like ε³ while Euler–Maruyama keeps an ε-independent
//! drift term, so the ratio
//!
//! ```text
//! ρ(ε) = sup-error(extended) / sup-error(EM)
//! ```
//!
//! should shrink as ε decreases. Each ε is benchmarked against the exact
//! Gaussian price, so the only noise in ρ is the estimators' own.

use crate::schemes::SchemeKind;

use super::benchmark::{closed_form_benchmark, family_for};
use super::convergence::ratio_with_stderr;
use super::estimator::{Exec, NoiseSpec};
use super::presets::preset;
use super::sweep::{find_sup, strike_sweep, SupError, SweepConfig};
use super::ExperimentError;

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonConfig {
    pub eps_values: Vec<f64>,
    pub steps: usize,
    pub strikes: Vec<f64>,
    pub paths: usize,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonRow {
    pub eps: f64,
    pub sup: Vec<SupError>,
    pub ratio: f64,
    pub ratio_stderr: f64,
}

pub fn epsilon_study(cfg: &EpsilonConfig, exec: &Exec) -> Result<Vec<EpsilonRow>, ExperimentError> {
    cfg.eps_values
        .iter()
        .map(|&eps| {
            let p = preset("small-diffusion", &[("eps".to_string(), eps)])?;
            let family = family_for(&p, cfg.strikes.clone())?;
            let bench = closed_form_benchmark(&p, &family)?.expect("small-diffusion has a closed form");
            let sweep = strike_sweep(
                &p,
                &SweepConfig {
                    schemes: SchemeKind::ALL.to_vec(),
                    n_values: vec![cfg.steps],
                    strikes: cfg.strikes.clone(),
                    paths: cfg.paths,
                    noise: cfg.noise,
                },
                &bench,
                exec,
            )?;
            let ext = find_sup(&sweep.summary, SchemeKind::ExtendedMilstein, cfg.steps).expect("extended row");
            let em = find_sup(&sweep.summary, SchemeKind::EulerMaruyama, cfg.steps).expect("EM row");
            let (ratio, ratio_stderr) = ratio_with_stderr(ext, em);
            Ok(EpsilonRow {
                eps,
                sup: sweep.summary,
                ratio,
                ratio_stderr,
            })
        })
        .collect()
}

/// True when, ordering rows by decreasing ε, no ratio rises by more than
/// `k` combined error bars over its predecessor.
pub fn ratio_non_increasing_within(rows: &[EpsilonRow], k: f64) -> bool {
    let mut sorted: Vec<&EpsilonRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    sorted
        .windows(2)
        .all(|w| w[1].ratio <= w[0].ratio + k * w[0].ratio_stderr.hypot(w[1].ratio_stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_pure_drift_integration() {
        let rows = epsilon_study(
            &EpsilonConfig {
                eps_values: vec![0.0],
                steps: 8,
                strikes: vec![0.3, 0.5],
                paths: 64,
                noise: NoiseSpec::qmc(1, 2),
            },
            &Exec::default(),
        )
        .unwrap();
        let r = &rows[0];
        // Deterministic paths: zero standard error, and the extended map is
        // exact to second order on this linear drift.
        assert!(r.sup.iter().all(|s| s.estimate_stderr == 0.0));
        assert!(r.ratio < 0.1, "{}", r.ratio);
    }

    #[test]
    fn monotonicity_helper() {
        let row = |eps, ratio, se| EpsilonRow {
            eps,
            sup: vec![],
            ratio,
            ratio_stderr: se,
        };
        assert!(ratio_non_increasing_within(&[row(0.1, 0.1, 0.0), row(0.4, 0.5, 0.0), row(0.2, 0.3, 0.0)], 2.0));
        assert!(!ratio_non_increasing_within(&[row(0.4, 0.1, 0.01), row(0.2, 0.3, 0.01)], 2.0));
        assert!(ratio_non_increasing_within(&[row(0.4, 0.1, 0.1), row(0.2, 0.3, 0.1)], 2.0));
    }
}
