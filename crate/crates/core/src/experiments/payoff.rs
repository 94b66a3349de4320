//! Path-dependent payoffs read from an augmented "running integral"
//! coordinate.
//!
//! ```text
//! Asian call:     scale · max(A_T / T − K, 0)
//! Asian digital:  scale · 1{A_T / T ≥ K}
//! ```

use std::fmt;
use std::str::FromStr;

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayoffKind {
    AsianCall,
    AsianDigital,
}

impl PayoffKind {
    pub fn name(self) -> &'static str {
        match self {
            PayoffKind::AsianCall => "asian-call",
            PayoffKind::AsianDigital => "asian-digital",
        }
    }

    #[inline]
    fn apply(self, average: f64, strike: f64) -> f64 {
        match self {
            PayoffKind::AsianCall => (average - strike).max(0.0),
            PayoffKind::AsianDigital => {
                if average >= strike {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PayoffKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "asian-call" => Ok(PayoffKind::AsianCall),
            "asian-digital" => Ok(PayoffKind::AsianDigital),
            other => Err(ExperimentError::InvalidParameter(format!(
                "unknown payoff '{other}' (expected asian-call or asian-digital)"
            ))),
        }
    }
}

/// A set of strikes sharing kind, horizon, scale and average coordinate, so
/// one simulated path prices all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffFamily {
    pub kind: PayoffKind,
    pub strikes: Vec<f64>,
    pub horizon: f64,
    pub scale: f64,
    pub average_coordinate: usize,
}

impl PayoffFamily {
    pub fn new(
        kind: PayoffKind,
        strikes: Vec<f64>,
        horizon: f64,
        scale: f64,
        average_coordinate: usize,
    ) -> Result<Self, ExperimentError> {
        if strikes.is_empty() {
            return Err(ExperimentError::InvalidParameter("at least one strike is required".into()));
        }
        if let Some(k) = strikes.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return Err(ExperimentError::InvalidParameter(format!("strike must be finite and nonnegative, got {k}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ExperimentError::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if !scale.is_finite() {
            return Err(ExperimentError::InvalidParameter("payoff scale must be finite".into()));
        }
        Ok(PayoffFamily {
            kind,
            strikes,
            horizon,
            scale,
            average_coordinate,
        })
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    pub fn average(&self, state: &[f64]) -> f64 {
        state[self.average_coordinate] / self.horizon
    }

    /// Writes one discounted payoff per strike.
    pub fn evaluate_into(&self, state: &[f64], out: &mut [f64]) {
        let avg = self.average(state);
        for (o, k) in out.iter_mut().zip(&self.strikes) {
            *o = self.scale * self.kind.apply(avg, *k);
        }
    }

    pub fn single(&self, index: usize) -> Payoff {
        Payoff {
            kind: self.kind,
            strike: self.strikes[index],
            horizon: self.horizon,
            scale: self.scale,
            average_coordinate: self.average_coordinate,
        }
    }
}

/// One payoff functional of the terminal augmented state.
#[derive(Debug, Clone, PartialEq)]
pub struct Payoff {
    pub kind: PayoffKind,
    pub strike: f64,
    pub horizon: f64,
    pub scale: f64,
    pub average_coordinate: usize,
}

impl Payoff {
    pub fn evaluate(&self, state: &[f64]) -> f64 {
        self.scale * self.kind.apply(state[self.average_coordinate] / self.horizon, self.strike)
    }

    pub fn as_family(&self) -> PayoffFamily {
        PayoffFamily {
            kind: self.kind,
            strikes: vec![self.strike],
            horizon: self.horizon,
            scale: self.scale,
            average_coordinate: self.average_coordinate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_and_digital() {
        let fam = PayoffFamily::new(PayoffKind::AsianCall, vec![90.0, 110.0], 2.0, 0.5, 1).unwrap();
        let mut out = [0.0; 2];
        fam.evaluate_into(&[0.0, 200.0], &mut out);
        assert_eq!(out, [5.0, 0.0]);
        let dig = Payoff {
            kind: PayoffKind::AsianDigital,
            strike: 100.0,
            horizon: 1.0,
            scale: 100.0,
            average_coordinate: 2,
        };
        assert_eq!(dig.evaluate(&[0.0, 0.0, 100.0]), 100.0);
        assert_eq!(dig.evaluate(&[0.0, 0.0, 99.999]), 0.0);
    }

    #[test]
    fn zero_strike_digital_pays_the_coupon() {
        let p = Payoff {
            kind: PayoffKind::AsianDigital,
            strike: 0.0,
            horizon: 1.0,
            scale: 100.0,
            average_coordinate: 0,
        };
        assert_eq!(p.evaluate(&[0.0]), 100.0);
        assert_eq!(p.evaluate(&[37.0]), 100.0);
    }

    #[test]
    fn rejects_bad_strikes() {
        assert!(PayoffFamily::new(PayoffKind::AsianCall, vec![-1.0], 1.0, 1.0, 0).is_err());
        assert!(PayoffFamily::new(PayoffKind::AsianCall, vec![f64::NAN], 1.0, 1.0, 0).is_err());
        assert!(PayoffFamily::new(PayoffKind::AsianCall, vec![], 1.0, 1.0, 0).is_err());
        assert_eq!("asian-digital".parse::<PayoffKind>().unwrap(), PayoffKind::AsianDigital);
    }
}
