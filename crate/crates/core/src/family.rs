//! Canonical exponential families used by the estimators.
//!
//! Every family is described through its cumulant function `b` and the
//! derivatives of the per-observation loss `l(eta, y) = b(eta) - y * eta`
//! with respect to the linear predictor. The Gaussian loss is the squared
//! error `(eta - y)^2 / 2`, which differs from `b(eta) - y * eta` only by a
//! term constant in `eta`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DvcmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Logistic,
    Poisson,
}

/// First three derivatives of the loss in the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossDerivatives {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Logistic, Family::Poisson];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
        }
    }

    /// Cumulant function.
    pub fn b(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * eta * eta,
            // log(1 + e^eta) without overflow for large |eta|
            Family::Logistic => (-eta.abs()).exp().ln_1p() + eta.max(0.0),
            Family::Poisson => eta.exp(),
        }
    }

    pub fn b1(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Logistic => sigmoid(eta),
            Family::Poisson => eta.exp(),
        }
    }

    pub fn b2(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Logistic => {
                let m = sigmoid(eta);
                m * (1.0 - m)
            }
            Family::Poisson => eta.exp(),
        }
    }

    pub fn b3(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.0,
            Family::Logistic => {
                let m = sigmoid(eta);
                m * (1.0 - m) * (1.0 - 2.0 * m)
            }
            Family::Poisson => eta.exp(),
        }
    }

    /// Mean function `g^{-1}`, which equals `b'` for canonical links.
    pub fn inverse_link(self, eta: f64) -> f64 {
        self.b1(eta)
    }

    /// Loss without input validation. Used in the inner solver loops.
    pub fn loss_unchecked(self, eta: f64, y: f64) -> f64 {
        match self {
            Family::Gaussian => {
                let r = eta - y;
                0.5 * r * r
            }
            _ => self.b(eta) - y * eta,
        }
    }

    /// Loss derivatives without input validation.
    pub fn derivatives_unchecked(self, eta: f64, y: f64) -> LossDerivatives {
        LossDerivatives {
            s1: self.b1(eta) - y,
            s2: self.b2(eta),
            s3: self.b3(eta),
        }
    }

    /// Negative log-likelihood contribution `l(eta, y)`.
    pub fn loss(self, eta: f64, y: f64) -> Result<f64> {
        check_finite(eta, y)?;
        if self == Family::Poisson && y < 0.0 {
            return Err(DvcmError::Domain(format!(
                "poisson response must be nonnegative, got {y}"
            )));
        }
        Ok(self.loss_unchecked(eta, y))
    }

    pub fn loss_derivatives(self, eta: f64, y: f64) -> Result<LossDerivatives> {
        check_finite(eta, y)?;
        Ok(self.derivatives_unchecked(eta, y))
    }
}

fn check_finite(eta: f64, y: f64) -> Result<()> {
    if !eta.is_finite() || !y.is_finite() {
        return Err(DvcmError::Domain(format!(
            "non-finite input (eta={eta}, y={y})"
        )));
    }
    Ok(())
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = DvcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "logistic" => Ok(Family::Logistic),
            "poisson" => Ok(Family::Poisson),
            other => Err(DvcmError::argument(format!(
                "unknown family `{other}` (expected gaussian, logistic or poisson)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn loss_examples() {
        assert_eq!(Family::Gaussian.loss(2.0, 1.0).unwrap(), 0.5);
        assert_relative_eq!(
            Family::Logistic.loss(0.0, 1.0).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_eq!(Family::Poisson.loss(0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn derivative_examples() {
        let d = Family::Logistic.loss_derivatives(0.0, 0.3).unwrap();
        assert_eq!(d.s2, 0.25);

        let d = Family::Gaussian.loss_derivatives(3.0, 1.0).unwrap();
        assert_eq!((d.s1, d.s2, d.s3), (2.0, 1.0, 0.0));

        let e = std::f64::consts::E;
        let d = Family::Poisson.loss_derivatives(1.0, 2.0).unwrap();
        assert_relative_eq!(d.s1, e - 2.0, epsilon = 1e-14);
        assert_relative_eq!(d.s2, e, epsilon = 1e-14);
        assert_relative_eq!(d.s3, e, epsilon = 1e-14);
    }

    #[test]
    fn non_finite_is_domain_error() {
        for fam in Family::ALL {
            assert!(matches!(fam.loss(f64::NAN, 1.0), Err(DvcmError::Domain(_))));
            assert!(matches!(
                fam.loss_derivatives(1.0, f64::INFINITY),
                Err(DvcmError::Domain(_))
            ));
        }
    }

    #[test]
    fn logistic_cumulant_is_stable() {
        let fam = Family::Logistic;
        assert_relative_eq!(fam.b(800.0), 800.0, epsilon = 1e-12);
        assert!(fam.b(-800.0) >= 0.0 && fam.b(-800.0) < 1e-300);
        assert!(fam.b1(-800.0) >= 0.0 && fam.b1(800.0) <= 1.0);
        assert!(fam.loss(50.0, 1.0).unwrap().is_finite());
    }

    #[test]
    fn parse_tokens() {
        assert_eq!("gaussian".parse::<Family>().unwrap(), Family::Gaussian);
        assert_eq!("Poisson".parse::<Family>().unwrap(), Family::Poisson);
        assert!("probit".parse::<Family>().is_err());
    }

    proptest! {
        #[test]
        fn loss_is_convex(e1 in -20.0f64..20.0, e2 in -20.0f64..20.0, lam in 0.0f64..1.0, y in 0.0f64..1.0) {
            for fam in Family::ALL {
                let y = if fam == Family::Logistic { y.round() } else { y * 5.0 };
                let mid = fam.loss_unchecked(lam * e1 + (1.0 - lam) * e2, y);
                let chord = lam * fam.loss_unchecked(e1, y) + (1.0 - lam) * fam.loss_unchecked(e2, y);
                prop_assert!(mid <= chord + 1e-12 * (1.0 + chord.abs()));
            }
        }

        #[test]
        fn second_derivative_nonnegative(eta in -50.0f64..50.0) {
            for fam in Family::ALL {
                prop_assert!(fam.b2(eta) >= 0.0);
            }
        }
    }
}
