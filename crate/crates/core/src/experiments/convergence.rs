//! Weak-order fits and scheme-ratio tables.
//!
//! ```text
//! log₂ |err(n)| ≈ intercept + slope · log₂ n,      weak order ≈ −slope
//! ```
//!
//! Points with a non-positive (or non-finite) error cannot be logged; they
//! are dropped and counted in [`OrderFit::excluded`].

use crate::schemes::SchemeKind;

use super::sweep::{find_sup, SupError};
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub used: usize,
    pub excluded: usize,
}

impl OrderFit {
    pub fn order(&self) -> f64 {
        -self.slope
    }
}

/// Least-squares fit of `log₂ err` against `log₂ n`.
pub fn convergence_order(points: &[(usize, f64)]) -> Result<OrderFit, ExperimentError> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, e)| *n > 0 && *e > 0.0 && e.is_finite())
        .map(|(n, e)| ((*n as f64).log2(), e.log2()))
        .collect();
    let excluded = points.len() - kept.len();
    let mut distinct: Vec<f64> = kept.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(ExperimentError::Fit(format!(
            "need at least 3 distinct n with positive errors, have {} ({excluded} excluded)",
            distinct.len()
        )));
    }
    let m = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / m;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Ok(OrderFit {
        slope,
        intercept: my - slope * mx,
        used: kept.len(),
        excluded,
    })
}

/// Fitted order per scheme present in `summary`, in first-appearance order.
pub fn orders_by_scheme(summary: &[SupError]) -> Vec<(SchemeKind, Result<OrderFit, ExperimentError>)> {
    let mut schemes: Vec<SchemeKind> = Vec::new();
    for s in summary {
        if !schemes.contains(&s.scheme) {
            schemes.push(s.scheme);
        }
    }
    schemes
        .into_iter()
        .map(|k| {
            let pts: Vec<(usize, f64)> = summary.iter().filter(|s| s.scheme == k).map(|s| (s.n, s.sup_error)).collect();
            (k, convergence_order(&pts))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub n: usize,
    pub ratio: f64,
    /// Delta-method error bar from the two combined standard errors.
    pub stderr: f64,
}

/// `ratio = a / b`, `se ≈ |ratio| · √((se_a/a)² + (se_b/b)²)`.
pub fn ratio_with_stderr(a: &SupError, b: &SupError) -> (f64, f64) {
    let ratio = a.sup_error / b.sup_error;
    let rel_a = a.combined_stderr() / a.sup_error;
    let rel_b = b.combined_stderr() / b.sup_error;
    (ratio, ratio.abs() * rel_a.hypot(rel_b))
}

/// `sup-error(numerator) / sup-error(denominator)` for every `n` both share.
pub fn ratio_table(summary: &[SupError], numerator: SchemeKind, denominator: SchemeKind) -> Vec<RatioRow> {
    summary
        .iter()
        .filter(|s| s.scheme == numerator)
        .filter_map(|a| {
            let b = find_sup(summary, denominator, a.n)?;
            let (ratio, stderr) = ratio_with_stderr(a, b);
            Some(RatioRow { n: a.n, ratio, stderr })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let first: Vec<_> = [2usize, 4, 8, 16].iter().map(|&n| (n, 3.0 / n as f64)).collect();
        let fit = convergence_order(&first).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.log2()).abs() < 1e-12);
        let second: Vec<_> = [2usize, 4, 8, 16].iter().map(|&n| (n, 1.0 / (n * n) as f64)).collect();
        assert!((convergence_order(&second).unwrap().order() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_positive_points_are_excluded_and_counted() {
        let pts = [(2, 0.5), (4, -0.1), (8, 0.125), (16, 0.0625), (32, 0.0)];
        let fit = convergence_order(&pts).unwrap();
        assert_eq!((fit.used, fit.excluded), (3, 2));
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(convergence_order(&[(2, 1.0), (4, 0.5), (8, -1.0)]).is_err());
        assert!(convergence_order(&[(2, 1.0), (2, 0.9), (4, 0.5)]).is_err());
    }

    #[test]
    fn ratio_rows() {
        let mk = |scheme, n, e: f64, se| SupError {
            scheme,
            n,
            sup_error: e,
            strike: 100.0,
            estimate_stderr: se,
            benchmark_stderr: 0.0,
        };
        let s = [
            mk(SchemeKind::EulerMaruyama, 4, 1.0, 0.1),
            mk(SchemeKind::ExtendedMilstein, 4, 0.1, 0.01),
            mk(SchemeKind::ExtendedMilstein, 8, 0.05, 0.01),
        ];
        let t = ratio_table(&s, SchemeKind::ExtendedMilstein, SchemeKind::EulerMaruyama);
        assert_eq!(t.len(), 1);
        assert!((t[0].ratio - 0.1).abs() < 1e-15);
        assert!((t[0].stderr - 0.1 * 0.1f64.hypot(0.1)).abs() < 1e-15);
    }
}
