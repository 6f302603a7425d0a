//! Obreshkov coefficient tables.
//!
//! The one-step formula couples `m` derivatives at the new time point with
//! `l` derivatives at the previous one:
//!
//! ```text
//! sum_{i=0}^{m} (-1)^i a(i,l,m) h^i x_n^(i) = sum_{i=0}^{l} a(i,m,l) h^i x_{n-1}^(i)
//! a(i,l,m) = (m+l-i)! / (m+l)! * binom(m, i)
//! ```
//!
//! Coefficients are generated with big-integer rationals so that the
//! truncation functional can be evaluated exactly, then rounded to `f64`
//! once for the integrator.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::SchemeError;

/// Largest accepted `l + m`.
pub const MAX_ORDER_SUM: usize = 20;

/// `a(i, l, m) = (m+l-i)!/(m+l)! * binom(m, i)`, exact.
///
/// Returns zero for `i > m`.
pub fn alpha(i: usize, l: usize, m: usize) -> BigRational {
    if i > m {
        return BigRational::zero();
    }
    // (m+l-i)!/(m+l)! = 1 / ((m+l-i+1) * ... * (m+l))
    let falling: BigInt = ((m + l - i + 1)..=(m + l)).map(BigInt::from).product();
    BigRational::new(binomial(m, i), falling)
}

fn binomial(n: usize, k: usize) -> BigInt {
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

/// An `(l, m)` Obreshkov rule with its coefficient tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ObreshkovScheme {
    l: usize,
    m: usize,
    alpha_current: Vec<BigRational>,
    alpha_past: Vec<BigRational>,
    current_f64: Vec<f64>,
    past_f64: Vec<f64>,
}

/// Serialized form of a scheme: just its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub l: usize,
    pub m: usize,
}

impl ObreshkovScheme {
    pub fn new(l: usize, m: usize) -> Result<Self, SchemeError> {
        if m == 0 {
            return Err(SchemeError::NoImplicitDerivative);
        }
        if l + m > MAX_ORDER_SUM {
            return Err(SchemeError::OrderTooHigh {
                l,
                m,
                max: MAX_ORDER_SUM,
            });
        }
        let alpha_current: Vec<_> = (0..=m).map(|i| alpha(i, l, m)).collect();
        let alpha_past: Vec<_> = (0..=l).map(|i| alpha(i, m, l)).collect();
        let to_f64 = |v: &Vec<BigRational>| -> Vec<f64> {
            v.iter()
                .map(|c| c.to_f64().expect("coefficient representable as f64"))
                .collect()
        };
        Ok(Self {
            l,
            m,
            current_f64: to_f64(&alpha_current),
            past_f64: to_f64(&alpha_past),
            alpha_current,
            alpha_past,
        })
    }

    /// Builds a scheme from signed parameters, as read from user input.
    pub fn from_signed(l: i64, m: i64) -> Result<Self, SchemeError> {
        if l < 0 || m < 0 {
            return Err(SchemeError::Negative { l, m });
        }
        Self::new(l as usize, m as usize)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn params(&self) -> SchemeParams {
        SchemeParams {
            l: self.l,
            m: self.m,
        }
    }

    /// `[a(0,l,m), ..., a(m,l,m)]`, the weights on the unknown time point.
    pub fn alpha_current(&self) -> &[BigRational] {
        &self.alpha_current
    }

    /// `[a(0,m,l), ..., a(l,m,l)]`, the weights on the known time point.
    pub fn alpha_past(&self) -> &[BigRational] {
        &self.alpha_past
    }

    pub fn current_weights(&self) -> &[f64] {
        &self.current_f64
    }

    pub fn past_weights(&self) -> &[f64] {
        &self.past_f64
    }

    /// Exact value of the formula's local truncation functional applied to
    /// `z(t) = t^degree` with `t_{n-1} = 0` and `t_n = h`.
    pub fn truncation_residual(&self, degree: usize, h: &BigRational) -> BigRational {
        let current: BigRational = self
            .alpha_current
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let term = a * h.pow(i as i32) * monomial_derivative(degree, i, h);
                if i % 2 == 0 {
                    term
                } else {
                    -term
                }
            })
            .sum();
        let zero = BigRational::zero();
        let past: BigRational = self
            .alpha_past
            .iter()
            .enumerate()
            .map(|(i, a)| a * h.pow(i as i32) * monomial_derivative(degree, i, &zero))
            .sum();
        current - past
    }

    /// One-step multiplier `R(z)` for `x' = lambda x`, `z = h lambda`.
    pub fn amplification(&self, z: Complex64) -> Result<Complex64, SchemeError> {
        let mut num = Complex64::new(0.0, 0.0);
        for (i, &a) in self.past_f64.iter().enumerate() {
            num += a * z.powi(i as i32);
        }
        let mut den = Complex64::new(0.0, 0.0);
        let mut den_scale = 0.0;
        for (i, &a) in self.current_f64.iter().enumerate() {
            let term = sign(i) * a * z.powi(i as i32);
            den_scale += term.norm();
            den += term;
        }
        if den.norm() <= 64.0 * f64::EPSILON * den_scale {
            return Err(SchemeError::Pole { re: z.re, im: z.im });
        }
        Ok(num / den)
    }

    /// Exact `R(z)` for rational real `z`.
    pub fn amplification_exact(&self, z: &BigRational) -> Result<BigRational, SchemeError> {
        let num: BigRational = self
            .alpha_past
            .iter()
            .enumerate()
            .map(|(i, a)| a * z.pow(i as i32))
            .sum();
        let den: BigRational = self
            .alpha_current
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let term = a * z.pow(i as i32);
                if i % 2 == 0 {
                    term
                } else {
                    -term
                }
            })
            .sum();
        if den.is_zero() {
            let re = z.to_f64().unwrap_or(f64::NAN);
            return Err(SchemeError::Pole { re, im: 0.0 });
        }
        Ok(num / den)
    }

    /// Whether `R(z) -> 0` as `z -> -inf` (numerator degree below the
    /// denominator's).
    pub fn is_stiffly_damped(&self) -> bool {
        self.l < self.m
    }
}

fn sign(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `d^i/dt^i t^p` evaluated at `t`.
fn monomial_derivative(p: usize, i: usize, t: &BigRational) -> BigRational {
    if i > p {
        return BigRational::zero();
    }
    let falling: BigInt = ((p - i + 1)..=p).map(BigInt::from).product();
    let power = if p == i {
        BigRational::one()
    } else {
        t.pow((p - i) as i32)
    };
    BigRational::from_integer(falling) * power
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Independent factorial oracle.
    fn factorial(n: usize) -> BigInt {
        let mut acc = BigInt::one();
        for k in 2..=n {
            acc *= BigInt::from(k);
        }
        acc
    }

    fn alpha_oracle(i: usize, l: usize, m: usize) -> BigRational {
        let binom = factorial(m) / (factorial(i) * factorial(m - i));
        BigRational::new(factorial(m + l - i) * binom, factorial(m + l))
    }

    #[test]
    fn backward_euler_coefficients() {
        let s = ObreshkovScheme::new(0, 1).unwrap();
        assert_eq!(s.alpha_current(), &[rat(1, 1), rat(1, 1)]);
        assert_eq!(s.alpha_past(), &[rat(1, 1)]);
    }

    #[test]
    fn trapezoidal_coefficients() {
        let s = ObreshkovScheme::new(1, 1).unwrap();
        assert_eq!(s.alpha_current(), &[rat(1, 1), rat(1, 2)]);
        assert_eq!(s.alpha_past(), &[rat(1, 1), rat(1, 2)]);
    }

    #[test]
    fn matches_factorial_oracle() {
        for l in 0..=10 {
            for m in 1..=10 {
                let s = ObreshkovScheme::new(l, m).unwrap();
                assert_eq!(s.alpha_current().len(), m + 1);
                assert_eq!(s.alpha_past().len(), l + 1);
                assert!(s.alpha_current()[0].is_one());
                for i in 0..=m {
                    assert_eq!(s.alpha_current()[i], alpha_oracle(i, l, m));
                }
                for i in 0..=l {
                    assert_eq!(s.alpha_past()[i], alpha_oracle(i, m, l));
                }
            }
        }
    }

    #[test]
    fn past_table_is_swapped_current_table() {
        for l in 1..=8 {
            for m in 1..=8 {
                let a = ObreshkovScheme::new(l, m).unwrap();
                let b = ObreshkovScheme::new(m, l).unwrap();
                assert_eq!(a.alpha_past(), b.alpha_current());
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            ObreshkovScheme::new(2, 0),
            Err(SchemeError::NoImplicitDerivative)
        ));
        assert!(matches!(
            ObreshkovScheme::from_signed(-1, 2),
            Err(SchemeError::Negative { .. })
        ));
        assert!(matches!(
            ObreshkovScheme::new(11, 10),
            Err(SchemeError::OrderTooHigh { .. })
        ));
        assert!(ObreshkovScheme::new(10, 10).is_ok());
    }

    #[test]
    fn truncation_residual_trapezoidal() {
        let s = ObreshkovScheme::new(1, 1).unwrap();
        for h in [rat(1, 1), rat(1, 3), rat(7, 2)] {
            assert!(s.truncation_residual(0, &h).is_zero());
            assert!(s.truncation_residual(1, &h).is_zero());
            assert!(s.truncation_residual(2, &h).is_zero());
        }
        // z = t^3, h = 1: 1 - (1/2) * 3 = -1/2 by hand.
        assert_eq!(s.truncation_residual(3, &rat(1, 1)), rat(-1, 2));
    }

    #[test]
    fn amplification_examples() {
        let s = ObreshkovScheme::new(1, 1).unwrap();
        let one = s.amplification(Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(one, Complex64::new(1.0, 0.0));
        for z in [
            Complex64::new(-0.3, 0.2),
            Complex64::new(1.5, -4.0),
            Complex64::new(-100.0, 0.0),
        ] {
            let expected = (1.0 + z / 2.0) / (1.0 - z / 2.0);
            assert!((s.amplification(z).unwrap() - expected).norm() < 1e-14);
        }
        assert!(matches!(
            s.amplification(Complex64::new(2.0, 0.0)),
            Err(SchemeError::Pole { .. })
        ));
    }

    #[test]
    fn l_less_than_m_vanishes_at_infinity() {
        let s = ObreshkovScheme::new(1, 2).unwrap();
        let mut last = f64::INFINITY;
        for e in 2..9 {
            let r = s.amplification(Complex64::new(-(10f64).powi(e), 0.0)).unwrap();
            assert!(r.norm() < last);
            last = r.norm();
        }
        assert!(last < 1e-7);
        assert!(s.is_stiffly_damped());
    }

    #[test]
    fn exact_amplification_matches_float() {
        let s = ObreshkovScheme::new(2, 3).unwrap();
        let z = rat(-3, 4);
        let exact = s.amplification_exact(&z).unwrap().to_f64().unwrap();
        let float = s.amplification(Complex64::new(-0.75, 0.0)).unwrap();
        assert!((exact - float.re).abs() < 1e-15);
        assert_eq!(float.im, 0.0);
    }
}
