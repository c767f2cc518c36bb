//! C^r smooth step used to blend the newest local barrier in and the oldest
//! one out over one perception epoch.
//!
//! On `[0, 1/λ]` the step is the polynomial
//! `P(s) = s^{r+1} Σ_{j=0}^{r} C(r+j, j) C(2r+1, r-j) (-s)^j` with `s = λt`;
//! it is identically 0 to the left and 1 to the right. `P(s) + P(1-s) = 1`,
//! so the upper half is evaluated as `1 - P(1-s)` to keep values and
//! derivatives near `s = 1` free of cancellation.

use crate::error::{CbfError, Result};

/// Largest supported smoothness order (binomials stay exact in `u128`).
pub const MAX_ORDER: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct HomotopyParams {
    order: usize,
    lambda: f64,
    /// Coefficients of `P` in ascending powers of `s`, length `2r + 2`.
    coeffs: Vec<f64>,
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

impl HomotopyParams {
    pub fn new(order: usize, lambda: f64) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(CbfError::InvalidArgument(format!(
                "homotopy order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(CbfError::InvalidArgument(format!(
                "homotopy compression must be >= 1, got {lambda}"
            )));
        }
        let r = order as u128;
        let mut coeffs = vec![0.0; 2 * order + 2];
        for j in 0..=r {
            let magnitude = binomial(r + j, j) * binomial(2 * r + 1, r - j);
            let signed = if j % 2 == 0 {
                magnitude as f64
            } else {
                -(magnitude as f64)
            };
            coeffs[(r + 1 + j) as usize] = signed;
        }
        Ok(Self {
            order,
            lambda,
            coeffs,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Ascending-power coefficients of the step polynomial in `s = λt`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `i`-th derivative of the polynomial at `s` (Horner on the derivative
    /// coefficients).
    fn poly_derivative(&self, i: usize, s: f64) -> f64 {
        let n = self.coeffs.len();
        if i >= n {
            return 0.0;
        }
        let mut acc = 0.0;
        for p in (i..n).rev() {
            let falling: f64 = (p - i + 1..=p).map(|f| f as f64).product();
            acc = acc * s + self.coeffs[p] * falling;
        }
        acc
    }
}

/// The smooth step η(t), clamped to `[0, 1]`.
pub fn eta(params: &HomotopyParams, t: f64) -> Result<f64> {
    eta_derivative(params, t, 0)
}

/// `order`-th derivative of η at `t`. Orders above the smoothness order are
/// rejected because they are not continuous at the knots.
pub fn eta_derivative(params: &HomotopyParams, t: f64, order: usize) -> Result<f64> {
    if !t.is_finite() {
        return Err(CbfError::InvalidArgument(format!(
            "homotopy argument must be finite, got {t}"
        )));
    }
    if order > params.order {
        return Err(CbfError::InvalidArgument(format!(
            "derivative order {order} exceeds smoothness order {}",
            params.order
        )));
    }
    let s = params.lambda * t;
    if s <= 0.0 {
        return Ok(0.0);
    }
    if s >= 1.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    let scale = params.lambda.powi(order as i32);
    if order == 0 {
        let v = if s <= 0.5 {
            params.poly_derivative(0, s)
        } else {
            1.0 - params.poly_derivative(0, 1.0 - s)
        };
        return Ok(v.clamp(0.0, 1.0));
    }
    let v = if s <= 0.5 {
        params.poly_derivative(order, s)
    } else {
        // d^i/ds^i [1 - P(1 - s)] = -(-1)^i P^{(i)}(1 - s)
        let sign = if order.is_multiple_of(2) { -1.0 } else { 1.0 };
        sign * params.poly_derivative(order, 1.0 - s)
    };
    Ok(scale * v)
}

/// η and its first two derivatives in one call (the second is zero when the
/// order is 1).
pub fn eta_triplet(params: &HomotopyParams, t: f64) -> Result<[f64; 3]> {
    let e0 = eta_derivative(params, t, 0)?;
    let e1 = eta_derivative(params, t, 1)?;
    let e2 = if params.order >= 2 {
        eta_derivative(params, t, 2)?
    } else {
        0.0
    };
    Ok([e0, e1, e2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(r: usize, lambda: f64) -> HomotopyParams {
        HomotopyParams::new(r, lambda).unwrap()
    }

    /// Hand-expanded quintic for r = 2: t³(10 − 15t + 6t²).
    fn quintic(t: f64) -> f64 {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }

    #[test]
    fn coefficients_for_low_orders() {
        assert_eq!(hp(1, 1.0).coefficients(), &[0.0, 0.0, 3.0, -2.0]);
        assert_eq!(hp(2, 1.0).coefficients(), &[0.0, 0.0, 0.0, 10.0, -15.0, 6.0]);
        assert_eq!(
            hp(3, 1.0).coefficients(),
            &[0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0]
        );
    }

    #[test]
    fn knot_values() {
        for r in 1..=3 {
            assert_eq!(eta(&hp(r, 1.0), -0.3).unwrap(), 0.0);
            assert_eq!(eta(&hp(r, 2.0), -0.3).unwrap(), 0.0);
        }
        assert_eq!(eta(&hp(2, 1.0), 1.0).unwrap(), 1.0);
        assert_eq!(eta(&hp(2, 4.0), 0.25).unwrap(), 1.0);
        assert_eq!(eta(&hp(2, 4.0), 0.9).unwrap(), 1.0);
    }

    #[test]
    fn midpoint_matches_quintic_oracle() {
        assert!((eta(&hp(2, 1.0), 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((quintic(0.5) - 0.5).abs() < 1e-15);
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!((eta(&hp(2, 1.0), t).unwrap() - quintic(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn first_derivative_at_midpoint() {
        let d = eta_derivative(&hp(2, 1.0), 0.5, 1).unwrap();
        assert!((d - 1.875).abs() < 1e-14);
        let h = 1e-6;
        let fd = (quintic(0.5 + h) - quintic(0.5 - h)) / (2.0 * h);
        assert!((fd - 1.875).abs() < 1e-8);
    }

    #[test]
    fn derivative_conditions_at_knots() {
        assert_eq!(eta_derivative(&hp(2, 1.0), 0.0, 1).unwrap(), 0.0);
        assert_eq!(eta_derivative(&hp(2, 1.0), 1.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn order_above_smoothness_is_rejected() {
        assert!(eta_derivative(&hp(1, 1.0), 0.5, 2).is_err());
        assert!(eta_derivative(&hp(2, 1.0), 0.5, 3).is_err());
        assert!(eta(&hp(2, 1.0), f64::NAN).is_err());
        assert!(HomotopyParams::new(0, 1.0).is_err());
        assert!(HomotopyParams::new(2, 0.5).is_err());
    }

    #[test]
    fn symmetric_split_agrees_with_direct_polynomial() {
        for r in 1..=MAX_ORDER {
            let params = hp(r, 1.0);
            for k in 1..40 {
                let s = k as f64 / 40.0;
                let direct: f64 = params
                    .coefficients()
                    .iter()
                    .enumerate()
                    .map(|(p, c)| c * s.powi(p as i32))
                    .sum();
                assert!((eta(&params, s).unwrap() - direct).abs() < 1e-9, "r={r} s={s}");
            }
        }
    }

    #[test]
    fn monotone_on_transition_interval() {
        for r in 1..=3 {
            for lambda in [1.0, 2.0, 4.0] {
                let params = hp(r, lambda);
                let mut prev = 0.0;
                for k in 0..=1000 {
                    let t = k as f64 / (1000.0 * lambda);
                    let v = eta(&params, t).unwrap();
                    assert!(v >= prev - 1e-15);
                    assert!(eta_derivative(&params, t, 1).unwrap() >= -1e-12);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences_inside() {
        for r in 1..=3 {
            let params = hp(r, 2.0);
            for k in 1..20 {
                let t = k as f64 / 40.0;
                for order in 1..=r {
                    let h = 3e-6;
                    let fd = (eta_derivative(&params, t + h, order - 1).unwrap()
                        - eta_derivative(&params, t - h, order - 1).unwrap())
                        / (2.0 * h);
                    let an = eta_derivative(&params, t, order).unwrap();
                    assert!(
                        (fd - an).abs() <= 1e-5 * an.abs().max(2f64.powi(order as i32)),
                        "r={r} order={order} t={t}: {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn no_jumps_across_knots() {
        for r in 1..=3 {
            for lambda in [1.0, 2.0, 4.0] {
                let params = hp(r, lambda);
                for knot in [0.0, 1.0 / lambda] {
                    for order in 0..=r {
                        let eps = 1e-12;
                        let left = eta_derivative(&params, knot - eps, order).unwrap();
                        let right = eta_derivative(&params, knot + eps, order).unwrap();
                        assert!((left - right).abs() < 1e-5, "r={r} λ={lambda} order={order}");
                    }
                }
            }
        }
    }
}
