//! The catalogue of functions `F` applied to the scalar curvature.
//!
//! Every entry is a real polynomial, so `F`, `F′`, `F″` and `F‴` are exact
//! and defined for all real `s` (scalar curvature may change sign).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::field::ScalarField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FScalarFunction {
    /// `F(s) = s`.
    Linear,
    /// `F(s) = s^β`, `β ≥ 1`.
    Power { beta: u32 },
    /// `F(s) = Σ cₖ sᵏ`, lowest degree first.
    Polynomial { coefficients: Vec<f64> },
    /// `F(s) = a·s^β + c`.
    AffinePower { scale: f64, beta: u32, offset: f64 },
}

impl FScalarFunction {
    pub fn power(beta: u32) -> Self {
        FScalarFunction::Power { beta }
    }

    pub fn polynomial(coefficients: &[f64]) -> Self {
        FScalarFunction::Polynomial {
            coefficients: coefficients.to_vec(),
        }
    }

    /// Coefficients `cₖ` of the equivalent polynomial.
    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            FScalarFunction::Linear => vec![0.0, 1.0],
            FScalarFunction::Power { beta } => {
                let mut c = vec![0.0; *beta as usize + 1];
                c[*beta as usize] = 1.0;
                c
            }
            FScalarFunction::Polynomial { coefficients } => coefficients.clone(),
            FScalarFunction::AffinePower { scale, beta, offset } => {
                let mut c = vec![0.0; *beta as usize + 1];
                c[0] += offset;
                c[*beta as usize] += scale;
                c
            }
        }
    }

    /// Rejects constant functions and non-finite coefficients.
    pub fn validate(&self) -> Result<()> {
        let c = self.coefficients();
        if c.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::InvalidFunction("non-finite coefficient".into()));
        }
        match self {
            FScalarFunction::Power { beta: 0 } | FScalarFunction::AffinePower { beta: 0, .. } => {
                return Err(GeomError::InvalidFunction("power must be at least 1".into()));
            }
            _ => {}
        }
        if c.iter().skip(1).all(|&v| v == 0.0) {
            return Err(GeomError::InvalidFunction("F must be non-constant".into()));
        }
        Ok(())
    }

    /// `F⁽ᵏ⁾(s)` for `k ≤ 3` (any `k` works).
    pub fn derivative(&self, k: usize, s: f64) -> f64 {
        let c = self.coefficients();
        let mut acc = 0.0;
        for (p, &cp) in c.iter().enumerate().skip(k).rev() {
            let falling: f64 = (0..k).map(|i| (p - i) as f64).product();
            acc = acc * s + cp * falling;
        }
        acc
    }

    pub fn value(&self, s: f64) -> f64 {
        self.derivative(0, s)
    }

    pub fn d1(&self, s: f64) -> f64 {
        self.derivative(1, s)
    }

    pub fn d2(&self, s: f64) -> f64 {
        self.derivative(2, s)
    }

    pub fn d3(&self, s: f64) -> f64 {
        self.derivative(3, s)
    }

    /// `F⁽ᵏ⁾` applied pointwise to a field.
    pub fn apply(&self, k: usize, s: &ScalarField) -> ScalarField {
        let c = self.coefficients();
        s.map(move |x| {
            let mut acc = 0.0;
            for (p, &cp) in c.iter().enumerate().skip(k).rev() {
                let falling: f64 = (0..k).map(|i| (p - i) as f64).product();
                acc = acc * x + cp * falling;
            }
            acc
        })
    }

    /// True when `F″ ≡ 0` and `F‴ ≡ 0`.
    pub fn is_affine(&self) -> bool {
        self.coefficients().iter().skip(2).all(|&v| v == 0.0)
    }
}

impl fmt::Display for FScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FScalarFunction::Linear => write!(f, "s"),
            FScalarFunction::Power { beta } => write!(f, "s^{beta}"),
            FScalarFunction::Polynomial { coefficients } => {
                let terms: Vec<String> = coefficients
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(p, c)| match p {
                        0 => format!("{c}"),
                        1 => format!("{c}*s"),
                        _ => format!("{c}*s^{p}"),
                    })
                    .collect();
                write!(f, "{}", terms.join(" + "))
            }
            FScalarFunction::AffinePower { scale, beta, offset } => write!(f, "{scale}*s^{beta} + {offset}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_functions_are_rejected() {
        assert!(FScalarFunction::polynomial(&[3.0]).validate().is_err());
        assert!(FScalarFunction::polynomial(&[3.0, 0.0, 0.0]).validate().is_err());
        assert!(FScalarFunction::power(0).validate().is_err());
        assert!(FScalarFunction::Linear.validate().is_ok());
        assert!(FScalarFunction::polynomial(&[0.0, 1.0, 1.0]).validate().is_ok());
    }

    #[test]
    fn closed_form_derivatives() {
        let f = FScalarFunction::power(3);
        assert_eq!(f.value(2.0), 8.0);
        assert_eq!(f.d1(2.0), 12.0);
        assert_eq!(f.d2(2.0), 12.0);
        assert_eq!(f.d3(2.0), 6.0);
        let a = FScalarFunction::AffinePower {
            scale: 2.0,
            beta: 2,
            offset: 1.0,
        };
        assert_eq!(a.value(-3.0), 19.0);
        assert_eq!(a.d1(-3.0), -12.0);
        assert!(FScalarFunction::Linear.is_affine());
        assert!(!FScalarFunction::power(2).is_affine());
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(
            coeffs in prop::collection::vec(-2.0f64..2.0, 2..6),
            s in -2.0f64..2.0,
        ) {
            let f = FScalarFunction::polynomial(&coeffs);
            let h = 1e-3;
            for k in 0..3 {
                // five-point central difference of F⁽ᵏ⁾
                let g = |x: f64| f.derivative(k, x);
                let fd = (g(s - 2.0 * h) - 8.0 * g(s - h) + 8.0 * g(s + h) - g(s + 2.0 * h)) / (12.0 * h);
                let exact = f.derivative(k + 1, s);
                prop_assert!((fd - exact).abs() <= 1e-8 * (1.0 + exact.abs()));
            }
        }
    }
}
