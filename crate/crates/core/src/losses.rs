//! Zero-one, margin and hinge losses over precomputed margins `y * h(x)`.

use crate::error::{Error, Result};

/// Confidence margin `rho` and norm bound `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginParams {
    pub rho: f64,
    pub lambda: f64,
}

impl MarginParams {
    pub fn new(rho: f64, lambda: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::param(format!("rho must be positive and finite, got {rho}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive and finite, got {lambda}")));
        }
        Ok(Self { rho, lambda })
    }
}

fn nonempty(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        Err(Error::param("risk of an empty sample is undefined"))
    } else {
        Ok(())
    }
}

/// Pointwise rho-hinge loss `max(1 - u/rho, 0)`.
#[inline]
pub fn hinge(u: f64, rho: f64) -> f64 {
    (1.0 - u / rho).max(0.0)
}

/// Fraction of margins `<= 0`.
pub fn zero_one_risk(scores: &[f64]) -> Result<f64> {
    margin_risk(scores, 0.0)
}

/// Fraction of margins `<= rho`.
pub fn margin_risk(scores: &[f64], rho: f64) -> Result<f64> {
    nonempty(scores)?;
    if !(rho >= 0.0) {
        return Err(Error::param(format!("rho must be nonnegative, got {rho}")));
    }
    let count = scores.iter().filter(|&&s| s <= rho).count();
    Ok(count as f64 / scores.len() as f64)
}

/// Mean rho-hinge loss.
pub fn hinge_risk(scores: &[f64], rho: f64) -> Result<f64> {
    nonempty(scores)?;
    if !(rho > 0.0) {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    Ok(scores.iter().map(|&s| hinge(s, rho)).sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(zero_one_risk(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(zero_one_risk(&[0.0]).unwrap(), 1.0);
        assert_eq!(zero_one_risk(&[1.0, -1.0, 0.0, 2.0]).unwrap(), 0.5);
        assert_eq!(margin_risk(&[0.5, 1.5], 1.0).unwrap(), 0.5);
        assert_eq!(margin_risk(&[2.0, 3.0], 1.0).unwrap(), 0.0);
        let rho = 0.7;
        assert_eq!(hinge_risk(&[rho, rho], rho).unwrap(), 0.0);
        assert_eq!(hinge_risk(&[0.0, 0.0], rho).unwrap(), 1.0);
        assert_eq!(hinge_risk(&[-rho], rho).unwrap(), 2.0);
    }

    #[test]
    fn errors() {
        assert!(zero_one_risk(&[]).is_err());
        assert!(margin_risk(&[1.0], -0.1).is_err());
        assert!(hinge_risk(&[1.0], 0.0).is_err());
        assert!(MarginParams::new(0.0, 1.0).is_err());
        assert!(MarginParams::new(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn hinge_dominates_zero_one(scores in prop::collection::vec(-5.0f64..5.0, 1..40), rho in 0.01f64..3.0) {
            prop_assert!(hinge_risk(&scores, rho).unwrap() >= zero_one_risk(&scores).unwrap());
        }

        #[test]
        fn margin_risk_collapses_at_zero(scores in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            prop_assert_eq!(margin_risk(&scores, 0.0).unwrap(), zero_one_risk(&scores).unwrap());
        }

        #[test]
        fn margin_risk_monotone(scores in prop::collection::vec(-5.0f64..5.0, 1..40), a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(margin_risk(&scores, lo).unwrap() <= margin_risk(&scores, hi).unwrap());
        }

        #[test]
        fn hinge_nondecreasing_in_rho_for_nonnegative_scores(scores in prop::collection::vec(0.0f64..5.0, 1..40), a in 0.01f64..3.0, b in 0.01f64..3.0) {
            // d/drho (1 - u/rho) = u/rho^2 >= 0 when u >= 0.
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(hinge_risk(&scores, lo).unwrap() <= hinge_risk(&scores, hi).unwrap() + 1e-15);
        }

        #[test]
        fn hinge_is_lipschitz(u in -5.0f64..5.0, rho in 0.05f64..3.0) {
            let h = 1e-6;
            let slope = (hinge(u + h, rho) - hinge(u, rho)).abs() / h;
            prop_assert!(slope <= 1.0 / rho + 1e-6 / rho);
        }
    }
}
