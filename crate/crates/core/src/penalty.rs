//! Scalar penalty functions: the SCAD penalty and its derivative, the
//! stationarity function of the two-pixel problem, and the SATV edge weight.
//!
//! All functions take a nonnegative gradient magnitude. SCAD behaves like
//! `lambda * theta` near zero and is clipped to a constant beyond
//! `a * lambda`, so large jumps are not shrunk.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, Error, Result};

/// Customary SCAD shape parameter.
pub const DEFAULT_SCAD_A: f64 = 3.7;

/// SCAD hyperparameters. `lambda > 0`, `a > 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScadParams {
    lambda: f64,
    a: f64,
}

impl ScadParams {
    pub fn new(lambda: f64, a: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        if !(a.is_finite() && a > 2.0) {
            return Err(Error::Domain {
                name: "a",
                value: a,
                expected: "finite and > 2",
            });
        }
        Ok(Self { lambda, a })
    }

    /// `ScadParams` with the customary `a = 3.7`.
    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, DEFAULT_SCAD_A)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Value at which the penalty flattens out, `a * lambda`.
    pub fn clip_point(&self) -> f64 {
        self.a * self.lambda
    }

    /// Constant value of the penalty beyond the clip point, `(a + 1) lambda^2 / 2`.
    pub fn plateau(&self) -> f64 {
        0.5 * (self.a + 1.0) * self.lambda * self.lambda
    }

    // Unchecked evaluation for hot loops; callers guarantee theta >= 0.
    #[inline]
    pub(crate) fn derivative_unchecked(&self, theta: f64) -> f64 {
        let lam = self.lambda;
        if theta <= lam {
            lam
        } else {
            (self.a * lam - theta).max(0.0) / (self.a - 1.0)
        }
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, theta: f64) -> f64 {
        let lam = self.lambda;
        let a = self.a;
        if theta <= lam {
            lam * theta
        } else if theta <= a * lam {
            (2.0 * a * lam * theta - theta * theta - lam * lam) / (2.0 * (a - 1.0))
        } else {
            self.plateau()
        }
    }
}

/// SATV hyperparameters. Both must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatvParams {
    lambda: f64,
    e: f64,
}

impl SatvParams {
    pub fn new(lambda: f64, e: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("e", e)?;
        Ok(Self { lambda, e })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn e(&self) -> f64 {
        self.e
    }
}

/// SCAD derivative `p'(theta)`: `lambda` on `[0, lambda]`, then a linear ramp
/// down to zero at `a * lambda`, then zero.
pub fn scad_derivative(theta: f64, p: &ScadParams) -> Result<f64> {
    check_nonnegative("theta", theta)?;
    Ok(p.derivative_unchecked(theta))
}

/// SCAD penalty `p(theta)` with `p(0) = 0`, the antiderivative of
/// [`scad_derivative`].
pub fn scad_value(theta: f64, p: &ScadParams) -> Result<f64> {
    check_nonnegative("theta", theta)?;
    Ok(p.value_unchecked(theta))
}

/// `x + p'(x)`, the left-hand side of the stationarity condition of the
/// two-pixel problem. Strictly increasing on `x > 0` with infimum `lambda`.
pub fn stationarity_lhs(x: f64, p: &ScadParams) -> Result<f64> {
    check_nonnegative("x", x)?;
    Ok(x + p.derivative_unchecked(x))
}

/// SATV edge weight `1/(|gx| + e) + 1/(|gy| + e)`, bounded above by `2/e`.
pub fn satv_weight(gx: f64, gy: f64, e: f64) -> Result<f64> {
    check_positive("e", e)?;
    Ok(satv_weight_unchecked(gx, gy, e))
}

#[inline]
pub(crate) fn satv_weight_unchecked(gx: f64, gy: f64, e: f64) -> f64 {
    1.0 / (gx.abs() + e) + 1.0 / (gy.abs() + e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(lambda: f64) -> ScadParams {
        ScadParams::new(lambda, 3.7).unwrap()
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(scad_derivative(0.5, &p(1.0)).unwrap(), 1.0);
        assert_eq!(scad_derivative(5.0, &p(1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(scad_derivative(2.0, &p(1.0)).unwrap(), 1.7 / 2.7, epsilon = 1e-15);
        assert_eq!(scad_derivative(0.0, &p(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn value_examples() {
        assert_eq!(scad_value(0.0, &p(1.0)).unwrap(), 0.0);
        assert_eq!(scad_value(1.0, &p(1.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(scad_value(10.0, &p(1.0)).unwrap(), 2.35, epsilon = 1e-15);
        // continuity at the clip point
        let q = p(2.0);
        let at = scad_value(q.clip_point(), &q).unwrap();
        assert_abs_diff_eq!(at, q.plateau(), epsilon = 1e-12);
    }

    #[test]
    fn stationarity_examples() {
        assert_eq!(stationarity_lhs(0.0, &p(1.0)).unwrap(), 1.0);
        assert_eq!(stationarity_lhs(5.0, &p(1.0)).unwrap(), 5.0);
        let expected = 3.7 / 2.7 + (1.0 - 1.0 / 2.7) * 2.0;
        assert_abs_diff_eq!(stationarity_lhs(2.0, &p(1.0)).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn satv_examples() {
        assert_abs_diff_eq!(satv_weight(0.0, 0.0, 10.0).unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(satv_weight(90.0, 0.0, 10.0).unwrap(), 0.11, epsilon = 1e-15);
        assert!(satv_weight(1e300, 1e300, 10.0).unwrap() < 1e-290);
    }

    #[test]
    fn domain_errors() {
        assert!(scad_derivative(-1.0, &p(1.0)).is_err());
        assert!(scad_value(-1e-9, &p(1.0)).is_err());
        assert!(stationarity_lhs(-0.5, &p(1.0)).is_err());
        assert!(satv_weight(1.0, 1.0, 0.0).is_err());
        assert!(satv_weight(1.0, 1.0, -2.0).is_err());
        assert!(ScadParams::new(0.0, 3.7).is_err());
        assert!(ScadParams::new(1.0, 2.0).is_err());
        assert!(ScadParams::new(1.0, f64::NAN).is_err());
        assert!(SatvParams::new(1.0, 0.0).is_err());
    }

    // Piecewise form written out independently of derivative_unchecked.
    fn lhs_piecewise(x: f64, lam: f64, a: f64) -> f64 {
        if x < lam {
            lam + x
        } else if x <= a * lam {
            a * lam / (a - 1.0) + (1.0 - 1.0 / (a - 1.0)) * x
        } else {
            x
        }
    }

    // Composite Simpson on [0, t], split at the kinks so each panel is smooth.
    fn integrate_derivative(t: f64, q: &ScadParams) -> f64 {
        let f = |x: f64| q.derivative_unchecked(x);
        let breaks = [0.0, q.lambda().min(t), q.clip_point().min(t), t];
        breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let (lo, hi) = (w[0], w[1]);
                let n = 200;
                let h = (hi - lo) / n as f64;
                let mut s = f(lo) + f(hi);
                for i in 1..n {
                    s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
                }
                s * h / 3.0
            })
            .sum()
    }

    proptest! {
        #[test]
        fn derivative_shape(lam in 0.01f64..100.0, a in 2.01f64..10.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let q = ScadParams::new(lam, a).unwrap();
            let (t1, t2) = {
                let x = u * 2.0 * a * lam;
                let y = v * 2.0 * a * lam;
                if x <= y { (x, y) } else { (y, x) }
            };
            let d1 = scad_derivative(t1, &q).unwrap();
            let d2 = scad_derivative(t2, &q).unwrap();
            prop_assert!(d2 <= d1);
            prop_assert!(d1 >= 0.0 && d1 <= lam);
            if t1 <= lam { prop_assert_eq!(d1, lam); }
            if t2 >= a * lam { prop_assert_eq!(d2, 0.0); }
            // Lipschitz continuity with constant 1/(a-1)
            prop_assert!(d1 - d2 <= (t2 - t1) / (a - 1.0) + 1e-12 * lam);
        }

        #[test]
        fn value_matches_integrated_derivative(lam in 0.01f64..100.0, a in 2.01f64..10.0, u in 0.0f64..1.0) {
            let q = ScadParams::new(lam, a).unwrap();
            let t = u * 2.0 * a * lam;
            let exact = scad_value(t, &q).unwrap();
            let numeric = integrate_derivative(t, &q);
            prop_assert!((exact - numeric).abs() <= 1e-8 * exact + f64::MIN_POSITIVE,
                "t={t} exact={exact} numeric={numeric}");
        }

        #[test]
        fn stationarity_identity_and_monotone(lam in 0.01f64..100.0, a in 2.01f64..10.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let q = ScadParams::new(lam, a).unwrap();
            let x1 = u * 2.0 * a * lam;
            let x2 = v * 2.0 * a * lam;
            let l1 = stationarity_lhs(x1, &q).unwrap();
            prop_assert_eq!(l1, x1 + scad_derivative(x1, &q).unwrap());
            let pw = lhs_piecewise(x1, lam, a);
            prop_assert!((l1 - pw).abs() <= 1e-12 * pw.max(1.0));
            prop_assert!(l1 >= lam);
            if x2 > x1 && x1 > 0.0 {
                prop_assert!(stationarity_lhs(x2, &q).unwrap() > l1);
            }
        }

        #[test]
        fn satv_bounded_and_sign_symmetric(gx in -1e4f64..1e4, gy in -1e4f64..1e4, e in 1e-3f64..1e3) {
            let w = satv_weight(gx, gy, e).unwrap();
            prop_assert!(w > 0.0 && w <= 2.0 / e);
            prop_assert_eq!(w, satv_weight(-gx, gy, e).unwrap());
            prop_assert_eq!(w, satv_weight(gx, -gy, e).unwrap());
        }
    }
}
