//! Model parameters.
//!
//! The Hamiltonian is
//!
//! ```text
//!     H_N = -sum_j d^2/dx_j^2 + gamma * sum_{j<k} V(x_j - x_k),
//! ```
//!
//! on the circle -pi <= x_j <= pi, with gamma = 2*lambda*(lambda - 1) and an
//! elliptic two-body potential controlled by a nome 0 <= q < 1. The nome may
//! equivalently be given through an inverse temperature beta via
//! q = exp(-beta/2); q = 0 is the trigonometric (Sutherland) limit.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coupling exponent lambda with an explicit rationality declaration.
///
/// Resonance detection depends on whether lambda is rational, so the
/// declaration is part of the input rather than something inferred from a
/// float. `parse` accepts "p/s" or a bare integer for rationals and a dotted
/// decimal literal for couplings declared irrational: resonance detection
/// must fire for integer couplings, so "2" means the exact rational 2, while
/// "2.0" opts out of exactness.
#[derive(Debug, Clone, PartialEq)]
pub enum Lambda {
    Rational { num: i64, den: i64 },
    Irrational(f64),
}

impl Lambda {
    pub fn rational(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidParameter("lambda denominator is zero".into()));
        }
        let (mut num, mut den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i64;
        if g > 1 {
            num /= g;
            den /= g;
        }
        if num <= 0 {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {num}/{den}"
            )));
        }
        Ok(Lambda::Rational { num, den })
    }

    pub fn irrational(value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive and finite, got {value}"
            )));
        }
        Ok(Lambda::Irrational(value))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some((p, s)) = text.split_once('/') {
            let num: i64 = p
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad lambda numerator {p:?}")))?;
            let den: i64 = s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad lambda denominator {s:?}")))?;
            Lambda::rational(num, den)
        } else if let Ok(num) = text.parse::<i64>() {
            Lambda::rational(num, 1)
        } else {
            let v: f64 = text
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad lambda value {text:?}")))?;
            Lambda::irrational(v)
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Lambda::Rational { num, den } => *num as f64 / *den as f64,
            Lambda::Irrational(v) => *v,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Lambda::Rational { .. })
    }

    /// Lambda as a coefficient-field scalar. Errors in exact fields when the
    /// coupling was declared irrational: exact runs must not silently embed
    /// a float that resonance detection would then treat as rational.
    pub fn as_scalar<S: Scalar>(&self) -> Result<S> {
        match self {
            Lambda::Rational { num, den } => Ok(S::from_ratio(*num, *den)),
            Lambda::Irrational(v) => {
                if S::EXACT {
                    Err(Error::ExactModeUnavailable(
                        "coupling exponent was declared irrational".into(),
                    ))
                } else {
                    Ok(S::from_f64_exact(*v))
                }
            }
        }
    }

    pub fn render(&self) -> String {
        match self {
            Lambda::Rational { num, den } => format!("{num}/{den}"),
            Lambda::Irrational(v) => format!("{v}"),
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// Validated model parameters: particle count, coupling, nome.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    n_particles: usize,
    lambda: Lambda,
    nome: f64,
}

impl ModelParameters {
    pub fn new(n_particles: usize, lambda: Lambda, nome: f64) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::InvalidParameter("particle count must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&nome) {
            return Err(Error::InvalidParameter(format!(
                "nome must satisfy 0 <= q < 1, got {nome}"
            )));
        }
        Ok(ModelParameters {
            n_particles,
            lambda,
            nome,
        })
    }

    /// Construct from an inverse temperature beta > 0, using q = exp(-beta/2).
    pub fn from_beta(n_particles: usize, lambda: Lambda, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "inverse temperature must be positive, got {beta}"
            )));
        }
        Self::new(n_particles, lambda, (-beta / 2.0).exp())
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn pair_count(&self) -> usize {
        self.n_particles * (self.n_particles - 1) / 2
    }

    pub fn lambda(&self) -> &Lambda {
        &self.lambda
    }

    pub fn lambda_f64(&self) -> f64 {
        self.lambda.value()
    }

    pub fn nome(&self) -> f64 {
        self.nome
    }

    /// Inverse temperature; infinite in the trigonometric limit q = 0.
    pub fn beta(&self) -> f64 {
        -2.0 * self.nome.ln()
    }

    /// Interaction strength gamma = 2*lambda*(lambda - 1).
    pub fn gamma(&self) -> f64 {
        let l = self.lambda.value();
        2.0 * l * (l - 1.0)
    }

    pub fn gamma_scalar<S: Scalar>(&self) -> Result<S> {
        let l: S = self.lambda.as_scalar()?;
        Ok(S::from_int(2) * l.clone() * (l - S::one()))
    }
}
