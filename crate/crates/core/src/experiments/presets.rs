//! Preset models with analytic Jacobians and Hessians.
//!
//! | id                | state        | noise | admissible region            |
//! |-------------------|--------------|-------|------------------------------|
//! | `bs-asian`        | `(S, A)`     | 1     | `S > 0`                      |
//! | `heston-asian`    | `(S, v, A)`  | 2     | `S > 0, v ≥ 0`               |
//! | `gbm`             | `(S)`        | 1     | `S > 0`                      |
//! | `small-diffusion` | `(X_R, X_S)` | 1     | all of ℝ²                    |
//!
//! Heston coefficients read the variance through `v⁺ = max(v, 0)`; for
//! `v ≤ 0` every derivative carrying a `1/√v` factor is taken as zero (the
//! derivative of the clamped map from the left). The state itself is never
//! modified, so the policy is the same for every scheme.
//!
//! The small-diffusion instance is
//!
//! ```text
//! dX_R = −X_R dt + ε dB,    dX_S = X_R dt
//! ```
//!
//! a hypo-elliptic system whose slow coordinate `X_S` only sees the noise
//! through the drift.

use crate::model::{Column, SdeModel, StateVector};

use super::payoff::PayoffKind;
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetId {
    BsAsian,
    HestonAsian,
    Gbm,
    SmallDiffusion,
}

impl PresetId {
    pub const ALL: [PresetId; 4] = [
        PresetId::BsAsian,
        PresetId::HestonAsian,
        PresetId::Gbm,
        PresetId::SmallDiffusion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetId::BsAsian => "bs-asian",
            PresetId::HestonAsian => "heston-asian",
            PresetId::Gbm => "gbm",
            PresetId::SmallDiffusion => "small-diffusion",
        }
    }

    pub fn parse(id: &str) -> Result<Self, ExperimentError> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.name() == id)
            .ok_or_else(|| ExperimentError::UnknownPreset(id.to_string()))
    }

    fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            PresetId::BsAsian => &[("r", 0.1), ("sigma", 0.4), ("s0", 100.0), ("a0", 0.0), ("T", 1.0)],
            PresetId::HestonAsian => &[
                ("alpha", 2.0),
                ("theta", 0.09),
                ("nu", 0.1),
                ("rho", 0.7),
                ("s0", 100.0),
                ("v0", 0.09),
                ("a0", 0.0),
                ("T", 1.0),
                ("cpn", 100.0),
            ],
            PresetId::Gbm => &[("r", 0.1), ("sigma", 0.2), ("s0", 100.0), ("T", 1.0)],
            PresetId::SmallDiffusion => &[("eps", 0.1), ("xr0", 1.0), ("xs0", 0.0), ("T", 1.0)],
        }
    }

    pub fn admissible_region(self) -> &'static str {
        match self {
            PresetId::BsAsian | PresetId::Gbm => "S > 0",
            PresetId::HestonAsian => "S > 0, v >= 0 (coefficients use max(v, 0))",
            PresetId::SmallDiffusion => "all of R^2",
        }
    }
}

/// Ordered parameter record; order follows the preset's documented list.
#[derive(Debug, Clone, PartialEq)]
pub struct Params(Vec<(&'static str, f64)>);

impl Params {
    pub fn get(&self, name: &str) -> f64 {
        self.0
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("parameter {name} not defined"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.0.iter().copied()
    }

    /// `k=v;k=v` with shortest round-trip floats; hashed into cache keys.
    pub fn canonical(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v:?}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// How the preset's default payoff reads the state.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTemplate {
    pub kind: PayoffKind,
    pub scale: f64,
    pub average_coordinate: usize,
}

#[derive(Debug, Clone)]
pub struct PresetModel {
    pub id: PresetId,
    pub model: SdeModel,
    pub params: Params,
    pub x0: StateVector,
    pub horizon: f64,
    pub payoff: Option<PayoffTemplate>,
    pub default_strikes: Vec<f64>,
}

impl PresetModel {
    pub fn admissible_region(&self) -> &'static str {
        self.id.admissible_region()
    }

    pub fn payoff_template(&self) -> Result<&PayoffTemplate, ExperimentError> {
        self.payoff
            .as_ref()
            .ok_or_else(|| ExperimentError::NoAverageCoordinate(self.id.name().to_string()))
    }
}

/// Inclusive arithmetic grid `start, start+step, …, ≤ stop`.
pub fn strike_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + step * i as f64).collect()
}

/// Builds a preset, applying `overrides` on top of the defaults.
pub fn preset(id: &str, overrides: &[(String, f64)]) -> Result<PresetModel, ExperimentError> {
    let id = PresetId::parse(id)?;
    let mut params: Vec<(&'static str, f64)> = id.defaults().to_vec();
    for (name, value) in overrides {
        let slot = params
            .iter_mut()
            .find(|(k, _)| k == name)
            .ok_or_else(|| ExperimentError::UnknownParameter {
                preset: id.name().to_string(),
                name: name.clone(),
                allowed: id.defaults().iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", "),
            })?;
        if !value.is_finite() {
            return Err(ExperimentError::InvalidParameter(format!("{name} must be finite")));
        }
        slot.1 = *value;
    }
    let params = Params(params);
    let horizon = params.get("T");
    if horizon <= 0.0 {
        return Err(ExperimentError::InvalidParameter("T must be positive".into()));
    }
    let built = match id {
        PresetId::BsAsian => bs_asian(&params)?,
        PresetId::HestonAsian => heston_asian(&params)?,
        PresetId::Gbm => gbm(&params)?,
        PresetId::SmallDiffusion => small_diffusion(&params)?,
    };
    Ok(PresetModel {
        id,
        model: built.0,
        params,
        x0: built.1,
        horizon,
        payoff: built.2,
        default_strikes: built.3,
    })
}

type Built = (SdeModel, StateVector, Option<PayoffTemplate>, Vec<f64>);

fn zero(_: &[f64], o: &mut [f64]) {
    o.iter_mut().for_each(|v| *v = 0.0);
}

fn require_nonnegative(name: &str, v: f64) -> Result<(), ExperimentError> {
    if v < 0.0 {
        return Err(ExperimentError::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
    }
    Ok(())
}

fn bs_asian(p: &Params) -> Result<Built, ExperimentError> {
    let (r, s) = (p.get("r"), p.get("sigma"));
    require_nonnegative("sigma", s)?;
    let model = SdeModel::builder("bs-asian", 2, 1)
        .drift(Column::new(
            move |x, o| {
                o[0] = r * x[0];
                o[1] = x[0];
            },
            move |_, o| o.copy_from_slice(&[r, 0.0, 1.0, 0.0]),
            zero,
        ))
        .diffusion(Column::new(
            move |x, o| {
                o[0] = s * x[0];
                o[1] = 0.0;
            },
            move |_, o| o.copy_from_slice(&[s, 0.0, 0.0, 0.0]),
            zero,
        ))
        .build()?;
    let template = PayoffTemplate {
        kind: PayoffKind::AsianCall,
        scale: (-r * p.get("T")).exp(),
        average_coordinate: 1,
    };
    let x0 = StateVector(vec![p.get("s0"), p.get("a0")]);
    Ok((model, x0, Some(template), strike_grid(10.0, 200.0, 10.0)))
}

fn gbm(p: &Params) -> Result<Built, ExperimentError> {
    let (r, s) = (p.get("r"), p.get("sigma"));
    require_nonnegative("sigma", s)?;
    let model = SdeModel::builder("gbm", 1, 1)
        .drift(Column::new(move |x, o| o[0] = r * x[0], move |_, o| o[0] = r, zero))
        .diffusion(Column::new(move |x, o| o[0] = s * x[0], move |_, o| o[0] = s, zero))
        .build()?;
    Ok((model, StateVector(vec![p.get("s0")]), None, Vec::new()))
}

fn small_diffusion(p: &Params) -> Result<Built, ExperimentError> {
    let eps = p.get("eps");
    if !(0.0..1.0).contains(&eps) {
        return Err(ExperimentError::InvalidParameter(format!("eps must lie in [0, 1), got {eps}")));
    }
    let model = SdeModel::builder("small-diffusion", 2, 1)
        .drift(Column::new(
            |x, o| {
                o[0] = -x[0];
                o[1] = x[0];
            },
            |_, o| o.copy_from_slice(&[-1.0, 0.0, 1.0, 0.0]),
            zero,
        ))
        .diffusion(Column::new(move |_, o| o.copy_from_slice(&[eps, 0.0]), zero, zero))
        .build()?;
    let template = PayoffTemplate {
        kind: PayoffKind::AsianCall,
        scale: 1.0,
        average_coordinate: 1,
    };
    let x0 = StateVector(vec![p.get("xr0"), p.get("xs0")]);
    Ok((model, x0, Some(template), strike_grid(0.30, 0.95, 0.05)))
}

fn heston_asian(p: &Params) -> Result<Built, ExperimentError> {
    let (alpha, theta, nu, rho) = (p.get("alpha"), p.get("theta"), p.get("nu"), p.get("rho"));
    if alpha <= 0.0 || theta <= 0.0 || nu <= 0.0 {
        return Err(ExperimentError::InvalidParameter("alpha, theta and nu must be positive".into()));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(ExperimentError::InvalidParameter(format!("rho must lie in [-1, 1], got {rho}")));
    }
    if 2.0 * alpha * theta <= nu * nu {
        return Err(ExperimentError::Feller { alpha, theta, nu });
    }
    if p.get("v0") < 0.0 {
        return Err(ExperimentError::InvalidParameter("v0 must be nonnegative".into()));
    }
    let rho_bar = (1.0 - rho * rho).sqrt();
    // Layout: S = 0, v = 1, A = 2. Jacobian index i*3 + l, Hessian (i*3 + l)*3 + m.
    let model = SdeModel::builder("heston-asian", 3, 2)
        .drift(Column::new(
            move |x, o| {
                o[0] = 0.0;
                o[1] = alpha * (theta - x[1]);
                o[2] = x[0];
            },
            move |_, o| {
                zero(&[], o);
                o[4] = -alpha;
                o[6] = 1.0;
            },
            zero,
        ))
        .diffusion(Column::new(
            move |x, o| {
                let sv = x[1].max(0.0).sqrt();
                o[0] = sv * x[0];
                o[1] = nu * rho * sv;
                o[2] = 0.0;
            },
            move |x, o| {
                zero(&[], o);
                let v = x[1];
                if v > 0.0 {
                    let sv = v.sqrt();
                    o[0] = sv;
                    o[1] = x[0] / (2.0 * sv);
                    o[4] = nu * rho / (2.0 * sv);
                }
            },
            move |x, o| {
                zero(&[], o);
                let v = x[1];
                if v > 0.0 {
                    let sv = v.sqrt();
                    let half_inv = 1.0 / (2.0 * sv);
                    let quarter_inv32 = -1.0 / (4.0 * v * sv);
                    // σ₁^S = √v S: ∂_{Sv} = ∂_{vS} = 1/(2√v), ∂_{vv} = −S/(4 v^{3/2})
                    o[1] = half_inv;
                    o[3] = half_inv;
                    o[4] = x[0] * quarter_inv32;
                    // σ₁^v = νρ√v
                    o[(3 + 1) * 3 + 1] = nu * rho * quarter_inv32;
                }
            },
        ))
        .diffusion(Column::new(
            move |x, o| {
                o[0] = 0.0;
                o[1] = nu * rho_bar * x[1].max(0.0).sqrt();
                o[2] = 0.0;
            },
            move |x, o| {
                zero(&[], o);
                if x[1] > 0.0 {
                    o[4] = nu * rho_bar / (2.0 * x[1].sqrt());
                }
            },
            move |x, o| {
                zero(&[], o);
                let v = x[1];
                if v > 0.0 {
                    o[(3 + 1) * 3 + 1] = -nu * rho_bar / (4.0 * v * v.sqrt());
                }
            },
        ))
        .nonnegative_coord(1)
        .build()?;
    let template = PayoffTemplate {
        kind: PayoffKind::AsianDigital,
        scale: p.get("cpn"),
        average_coordinate: 2,
    };
    let x0 = StateVector(vec![p.get("s0"), p.get("v0"), p.get("a0")]);
    Ok((model, x0, Some(template), strike_grid(10.0, 200.0, 10.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_defaults() {
        let bs = preset("bs-asian", &[]).unwrap();
        assert_eq!(bs.params.get("r"), 0.1);
        assert_eq!(bs.params.get("sigma"), 0.4);
        assert_eq!(bs.x0.0, vec![100.0, 0.0]);
        assert_eq!(bs.horizon, 1.0);
        let h = preset("heston-asian", &[]).unwrap();
        for (k, v) in [("alpha", 2.0), ("theta", 0.09), ("nu", 0.1), ("rho", 0.7), ("cpn", 100.0)] {
            assert_eq!(h.params.get(k), v);
        }
        assert_eq!(h.x0.0, vec![100.0, 0.09, 0.0]);
        assert_eq!(h.payoff.as_ref().unwrap().scale, 100.0);
    }

    #[test]
    fn feller_violation_names_the_inequality() {
        let o = vec![("nu".to_string(), 0.7), ("alpha".to_string(), 1.0), ("theta".to_string(), 0.09)];
        let err = preset("heston-asian", &o).unwrap_err();
        assert!(matches!(err, ExperimentError::Feller { .. }));
        assert!(err.to_string().contains("2*alpha*theta > nu^2"), "{err}");
    }

    #[test]
    fn unknown_ids_and_parameters() {
        assert!(matches!(preset("cir", &[]), Err(ExperimentError::UnknownPreset(_))));
        let err = preset("gbm", &[("kappa".into(), 1.0)]).unwrap_err();
        assert!(matches!(err, ExperimentError::UnknownParameter { .. }));
    }

    #[test]
    fn strike_grid_is_inclusive() {
        let g = strike_grid(10.0, 200.0, 10.0);
        assert_eq!(g.len(), 20);
        assert_eq!(g[19], 200.0);
        assert_eq!(strike_grid(100.0, 100.0, 10.0), vec![100.0]);
    }

    #[test]
    fn heston_negative_variance_is_clamped() {
        let h = preset("heston-asian", &[]).unwrap();
        let x = [100.0, -0.01, 5.0];
        assert_eq!(h.model.diffusion(1, &x), vec![0.0, 0.0, 0.0]);
        assert_eq!(h.model.diffusion(2, &x), vec![0.0, 0.0, 0.0]);
        let jet = h.model.jet(&x, true).unwrap();
        assert!(jet.jacobian(1).iter().chain(jet.hessian(2)).all(|v| *v == 0.0));
    }
}
