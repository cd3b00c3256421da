//! Scalar field abstraction for series coefficients.
//!
//! Every series-side computation (q-expansions, Laurent coefficients, the
//! spectral recursion) is generic over a coefficient field. Two fields are
//! provided: `f64` for fast floating-point runs and `BigRational` for exact
//! runs. Exact runs require the coupling exponent to be declared as a
//! rational number and produce bit-reproducible output.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Coefficient field for series arithmetic.
///
/// `close_to` is exact equality in the rational field and an absolute
/// comparison in the float field; algorithms use it for stabilization and
/// constraint checks so that exact runs never depend on a tolerance.
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True for fields with exact arithmetic.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Exact embedding of a float (every finite f64 is a dyadic rational).
    fn from_f64_exact(v: f64) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn close_to(&self, other: &Self, tol: f64) -> bool;
    /// Canonical textual form used by serializers ("3/4" for rationals,
    /// shortest round-trip decimal for floats).
    fn render(&self) -> String;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }

    fn one() -> Self {
        1.0
    }

    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64_exact(v: f64) -> Self {
        v
    }

    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn close_to(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }

    fn render(&self) -> String {
        format!("{self}")
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }

    fn one() -> Self {
        <BigRational as num_traits::One>::one()
    }

    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "rational with zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64_exact(v: f64) -> Self {
        assert!(v.is_finite(), "cannot embed a non-finite float");
        BigRational::from_float(v).expect("finite float embeds exactly")
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn to_f64(&self) -> f64 {
        // Falls back on a quotient of f64 conversions for magnitudes beyond
        // the direct conversion range; adequate for reporting.
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    fn close_to(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }

    fn render(&self) -> String {
        if self.denom() == &BigInt::from(1) {
            format!("{}", self.numer())
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Absolute value usable in both fields (used only for reporting).
pub fn scalar_abs_f64<S: Scalar>(v: &S) -> f64 {
    v.to_f64().abs()
}

/// Canonical JSON rendering of one coefficient: exact values as quoted
/// fraction strings (their textual form is not a JSON number), floats as
/// plain numbers.
pub fn json_scalar<S: Scalar>(s: &S) -> String {
    if S::EXACT {
        format!("\"{}\"", s.render())
    } else {
        s.render()
    }
}

/// Exact check helper: zero in exact fields, within `tol` in float fields.
pub fn scalar_is_negligible<S: Scalar>(v: &S, tol: f64) -> bool {
    if S::EXACT {
        v.is_zero()
    } else {
        v.to_f64().abs() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_round_trip() {
        let x = BigRational::from_ratio(3, 4);
        assert_eq!(x.render(), "3/4");
        assert_eq!(Scalar::to_f64(&x), 0.75);
        assert!(BigRational::EXACT);
    }

    #[test]
    fn rational_arithmetic_is_exact() {
        let third = BigRational::from_ratio(1, 3);
        let sum = third.clone() + third.clone() + third;
        assert_eq!(sum, BigRational::one());
    }

    #[test]
    fn float_close_to_uses_tolerance() {
        assert!(0.1f64.close_to(&(0.1 + 1e-12), 1e-9));
        assert!(!0.1f64.close_to(&0.2, 1e-9));
    }

    #[test]
    fn negligible_respects_field() {
        assert!(scalar_is_negligible(&1e-12f64, 1e-9));
        let tiny = BigRational::from_ratio(1, 1_000_000_000_000);
        assert!(!scalar_is_negligible(&tiny, 1e-9));
    }
}
