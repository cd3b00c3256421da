//! Truncated power series in q^2.
//!
//! Every elliptic quantity in the solver is expanded in the squared nome:
//! a `QSeries` of order L stores the coefficients of q^0, q^2, ..., q^{2L}.
//! Arithmetic is closed at fixed order; products truncate exactly at L, so
//! composing operations never changes the truncation order.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct QSeries<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> QSeries<S> {
    /// Series with all coefficients zero, order `order`.
    pub fn zero(order: usize) -> Self {
        QSeries {
            coeffs: vec![S::zero(); order + 1],
        }
    }

    /// The constant series 1.
    pub fn one(order: usize) -> Self {
        Self::constant(order, S::one())
    }

    pub fn constant(order: usize, value: S) -> Self {
        let mut coeffs = vec![S::zero(); order + 1];
        coeffs[0] = value;
        QSeries { coeffs }
    }

    /// The single term `value * q^{2*level}`.
    pub fn monomial(order: usize, level: usize, value: S) -> Self {
        assert!(level <= order, "monomial level {level} exceeds order {order}");
        let mut coeffs = vec![S::zero(); order + 1];
        coeffs[level] = value;
        QSeries { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<S>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least the q^0 coefficient");
        QSeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, level: usize) -> &S {
        &self.coeffs[level]
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_zero_within(&self, tol: f64) -> bool {
        self.coeffs
            .iter()
            .all(|c| crate::scalar::scalar_is_negligible(c, tol))
    }

    /// Panics if the orders differ: mixed-order arithmetic is a programming
    /// error, never a data condition.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.order(), other.order(), "series order mismatch");
        QSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.order(), other.order(), "series order mismatch");
        QSeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        QSeries {
            coeffs: self.coeffs.iter().map(|a| -a.clone()).collect(),
        }
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.order(), other.order(), "series order mismatch");
        let order = self.order();
        let mut out = vec![S::zero(); order + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().take(order + 1 - i).enumerate() {
                if b.is_zero() {
                    continue;
                }
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        QSeries { coeffs: out }
    }

    pub fn scale(&self, factor: &S) -> Self {
        QSeries {
            coeffs: self
                .coeffs
                .iter()
                .map(|a| a.clone() * factor.clone())
                .collect(),
        }
    }

    /// Add `series * factor` in place; the workhorse of the recursion.
    pub fn add_scaled_assign(&mut self, series: &Self, factor: &S) {
        assert_eq!(self.order(), series.order(), "series order mismatch");
        if factor.is_zero() {
            return;
        }
        for (a, b) in self.coeffs.iter_mut().zip(&series.coeffs) {
            if !b.is_zero() {
                *a = a.clone() + b.clone() * factor.clone();
            }
        }
    }

    /// Numerical evaluation at a concrete nome: sum of c_l * q^{2l}.
    pub fn eval(&self, q: f64) -> f64 {
        let q2 = q * q;
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * q2 + c.to_f64();
        }
        acc
    }

    /// Restrict to a smaller order (used when combining tables built at
    /// different depths; the dropped coefficients are the caller's choice,
    /// never an implicit side effect of arithmetic).
    pub fn truncated(&self, order: usize) -> Self {
        assert!(order <= self.order(), "cannot truncate upward");
        QSeries {
            coeffs: self.coeffs[..=order].to_vec(),
        }
    }
}
