//! Special functions of the elliptic pair potential.
//!
//! Everything here is built from one object, the odd Jacobi theta function
//! normalized with unit leading constant,
//!
//! ```text
//!   theta1(u) = sin(u) * prod_{n>=1} [1 - 2 q^{2n} cos(2u) + q^{4n}],
//! ```
//!
//! where 0 <= q < 1 is the nome, q = exp(-beta/2).  The interaction
//! potential is V(r) = -(d/dr)^2 log theta1(r/2), which degenerates to the
//! inverse-square sine potential (1/4) sin^{-2}(r/2) at q = 0.  The
//! Weierstrass functions for the period lattice (2*pi, i*beta) are recovered
//! from the same product: zeta(r) = eta1*r/pi + (1/2) theta1'/theta1 (r/2)
//! and wp(r) = V(r) - eta1/pi, with eta1 fixed by zeta(z) ~ 1/z near zero.
//!
//! On the series side, the potential has the (Abel regularized) plane-wave
//! expansion
//!
//! ```text
//!   V(r) = - sum_{n>=1} n [ c_n^2 e^{i n r} + s_n^2 e^{-i n r} ],
//!   c_n^2 = 1/(1 - q^{2n}),   s_n^2 = q^{2n}/(1 - q^{2n}),
//! ```
//!
//! whose coefficient sequences are exposed as truncated q^2-series.  The
//! regularized factor b_0(r) = -2i theta1(r/2) and the expansion of powers
//! of its phase-stripped form
//!
//! ```text
//!   bcheck(r) = (1 - w) * prod_{n>=1} (1 - q^{2n} w)(1 - q^{2n}/w),
//!   w = e^{i r},
//! ```
//!
//! in the plane-wave variable w feed the correlation-kernel computations.
//! Powers with non-integer exponent are expanded with generalized binomial
//! coefficients through the recurrence C(a,0) = 1, C(a,k) =
//! C(a,k-1)(a-k+1)/k, never through logarithms, so no branch choice enters
//! series space.  Denominator factors are always expanded in positive
//! powers of w, which is what the epsilon regularization selects; the
//! regulator itself is set to zero throughout.

mod params;
mod qseries;

pub use params::{Lambda, ModelParameters};
pub use qseries::QSeries;

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series_algebra::LaurentPoly;

/// Default number of factors kept in the infinite products.
pub const DEFAULT_PRODUCT_TERMS: usize = 64;

const PI: f64 = std::f64::consts::PI;

/// Distance (in the argument of theta1) below which a lattice point is
/// treated as an exact pole rather than a large finite value.
const POLE_EPS: f64 = 1e-9;

fn validate_q(q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "nome q must lie in [0, 1), got {q}"
        )));
    }
    Ok(())
}

fn validate_truncation(truncation: usize) -> Result<()> {
    if truncation == 0 {
        return Err(Error::InvalidParameter(
            "product truncation must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Relative error bound for truncating the theta products after `terms`
/// factors: every omitted factor differs from 1 by at most 3 q^{2n}, so the
/// tail is controlled by the first omitted term.
pub fn product_tail_bound(q: f64, terms: usize) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    3.0 * q.powi(2 * (terms as i32 + 1)) / (1.0 - q * q)
}

/// The product part prod_{n=1}^{terms} [1 - 2 q^{2n} cos(2u) + q^{4n}].
/// Strictly positive for 0 <= q < 1, since each factor is at least
/// (1 - q^{2n})^2.
fn theta_product(cos2u: f64, q: f64, terms: usize) -> f64 {
    let a = q * q;
    let mut an = 1.0;
    let mut prod = 1.0;
    for _ in 0..terms {
        an *= a;
        prod *= 1.0 - 2.0 * an * cos2u + an * an;
    }
    prod
}

/// theta1(u) = sin(u) * prod_{n>=1} [1 - 2 q^{2n} cos(2u) + q^{4n}].
///
/// Real for real arguments; returned as complex for uniformity with the
/// factor b_0 built from it.
pub fn theta1(u: f64, q: f64, truncation: usize) -> Result<Complex64> {
    validate_q(q)?;
    validate_truncation(truncation)?;
    Ok(Complex64::new(
        u.sin() * theta_product((2.0 * u).cos(), q, truncation),
        0.0,
    ))
}

fn near_multiple_of(x: f64, period: f64) -> bool {
    let k = (x / period).round();
    (x - k * period).abs() < POLE_EPS
}

/// Logarithmic derivative theta1'(u)/theta1(u), computed term by term:
///
/// ```text
///   rho(u) = cot(u) + sum_n 4 q^{2n} sin(2u) / (1 - 2 q^{2n} cos(2u) + q^{4n}).
/// ```
pub fn theta1_log_derivative(u: f64, q: f64, truncation: usize) -> Result<f64> {
    validate_q(q)?;
    validate_truncation(truncation)?;
    if near_multiple_of(u, PI) {
        return Err(Error::Pole { argument: u });
    }
    let (sin2u, cos2u) = (2.0 * u).sin_cos();
    let a = q * q;
    let mut an = 1.0;
    let mut sum = u.cos() / u.sin();
    for _ in 0..truncation {
        an *= a;
        sum += 4.0 * an * sin2u / (1.0 - 2.0 * an * cos2u + an * an);
    }
    Ok(sum)
}

/// Pair potential V(r) = -(d/dr)^2 log theta1(r/2), via the analytic
/// second derivative of the log of each product factor:
///
/// ```text
///   V(r) = 1/(4 sin^2(r/2)) - (1/4) sum_n (f_n'' f_n - f_n'^2) / f_n^2,
///   f_n(u) = 1 - 2 q^{2n} cos(2u) + q^{4n},  u = r/2.
/// ```
pub fn potential_v(r: f64, q: f64, truncation: usize) -> Result<f64> {
    validate_q(q)?;
    validate_truncation(truncation)?;
    if near_multiple_of(r, 2.0 * PI) {
        return Err(Error::Pole { argument: r });
    }
    let u = r / 2.0;
    let (sin2u, cos2u) = (2.0 * u).sin_cos();
    let sinu = u.sin();
    let a = q * q;
    let mut an = 1.0;
    let mut corr = 0.0;
    for _ in 0..truncation {
        an *= a;
        let f = 1.0 - 2.0 * an * cos2u + an * an;
        let fp = 4.0 * an * sin2u;
        let fpp = 8.0 * an * cos2u;
        corr += (fpp * f - fp * fp) / (f * f);
    }
    Ok(0.25 / (sinu * sinu) - 0.25 * corr)
}

/// Bogoliubov coefficient c_n^2 = 1/(1 - q^{2n}) = 1 + s_n^2 as a q^2-series.
pub fn bogoliubov_c_squared<S: Scalar>(n: usize, order: usize) -> QSeries<S> {
    let mut s = bogoliubov_s_squared(n, order);
    let one = QSeries::one(order);
    s = s.add(&one);
    s
}

/// Bogoliubov coefficient s_n^2 = sum_{m>=1} q^{2nm} as a q^2-series:
/// the coefficient of q^{2l} is 1 when n divides l, l >= n.
pub fn bogoliubov_s_squared<S: Scalar>(n: usize, order: usize) -> QSeries<S> {
    assert!(n >= 1, "mode index must be positive");
    let mut coeffs = vec![S::zero(); order + 1];
    let mut l = n;
    while l <= order {
        coeffs[l] = S::one();
        l += n;
    }
    QSeries::from_coeffs(coeffs)
}

/// Plane-wave coefficients of the potential for n = 1..n_max: the pair
/// (n c_n^2, n s_n^2) weighting the e^{i n r} and e^{-i n r} modes.
pub fn potential_fourier_coefficients<S: Scalar>(
    order: usize,
    n_max: usize,
) -> Vec<(QSeries<S>, QSeries<S>)> {
    (1..=n_max)
        .map(|n| {
            let weight = S::from_int(n as i64);
            let forward = bogoliubov_c_squared::<S>(n, order).scale(&weight);
            let backward = bogoliubov_s_squared::<S>(n, order).scale(&weight);
            (forward, backward)
        })
        .collect()
}

/// eta1 = zeta(pi) for the lattice (2*pi, i*beta):
///
/// ```text
///   eta1 = pi [ 1/12 - 2 sum_{n>=1} q^{2n} / (1 - q^{2n})^2 ],
/// ```
///
/// fixed by requiring zeta(z) - 1/z -> 0 as z -> 0.
pub fn eta1(q: f64, truncation: usize) -> Result<f64> {
    validate_q(q)?;
    validate_truncation(truncation)?;
    let a = q * q;
    let mut an = 1.0;
    let mut sum = 0.0;
    for _ in 0..truncation {
        an *= a;
        let d = 1.0 - an;
        sum += an / (d * d);
    }
    Ok(PI * (1.0 / 12.0 - 2.0 * sum))
}

/// Weierstrass zeta for periods (2*pi, i*beta), evaluated on the real line:
/// zeta(r) = eta1 r / pi + (1/2) theta1'/theta1 (r/2).
pub fn weierstrass_zeta(r: f64, q: f64, truncation: usize) -> Result<f64> {
    if near_multiple_of(r, 2.0 * PI) {
        return Err(Error::Pole { argument: r });
    }
    Ok(eta1(q, truncation)? * r / PI + 0.5 * theta1_log_derivative(r / 2.0, q, truncation)?)
}

/// Weierstrass wp = -zeta' for the same lattice; differs from the pair
/// potential by the additive constant exposed below.
pub fn weierstrass_p(r: f64, q: f64, truncation: usize) -> Result<f64> {
    Ok(potential_v(r, q, truncation)? - eta1(q, truncation)? / PI)
}

/// The additive constant wp(r) - V(r) = -eta1/pi, constant in r.
pub fn p_minus_v_constant(q: f64, truncation: usize) -> Result<f64> {
    Ok(-eta1(q, truncation)? / PI)
}

/// Regularized theta factor b_0(r) = -2i theta1(r/2)
///               = -2i sin(r/2) prod_n [1 - 2 q^{2n} cos r + q^{4n}].
pub fn b_factor(r: f64, q: f64, truncation: usize) -> Result<Complex64> {
    Ok(Complex64::new(0.0, -2.0) * theta1(r / 2.0, q, truncation)?)
}

/// Branch-fixed logarithm of b_0.  The real part is log |b_0|; the phase is
/// the continuous branch selected by shifting r infinitesimally into the
/// upper half plane,
///
/// ```text
///   arg b_0(r) = -pi/2 - pi * floor(r / 2 pi),
/// ```
///
/// which equals -pi/2 on the principal interval 0 < r < 2*pi.  Exponentiating
/// recovers b_factor for every non-pole real r.
pub fn b_factor_log(r: f64, q: f64, truncation: usize) -> Result<Complex64> {
    validate_q(q)?;
    validate_truncation(truncation)?;
    if near_multiple_of(r, 2.0 * PI) {
        return Err(Error::Pole { argument: r });
    }
    let magnitude = 2.0 * (r / 2.0).sin().abs() * theta_product(r.cos(), q, truncation);
    let phase = -PI / 2.0 - PI * (r / (2.0 * PI)).floor();
    Ok(Complex64::new(magnitude.ln(), phase))
}

/// d/dr log b_0(r) = (1/2) theta1'/theta1 (r/2).  Real: the phase of b_0 is
/// locally constant in r.
pub fn b_log_derivative(r: f64, q: f64, truncation: usize) -> Result<f64> {
    Ok(0.5 * theta1_log_derivative(r / 2.0, q, truncation)?)
}

/// Generalized binomial coefficients C(a, k) for k = 0..=k_max through the
/// recurrence C(a,0) = 1, C(a,k) = C(a,k-1)(a-k+1)/k.
pub fn binomial_coefficients<S: Scalar>(a: &S, k_max: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(S::one());
    for k in 1..=k_max {
        let k_s = S::from_int(k as i64);
        let prev = out[k - 1].clone();
        out.push(prev * (a.clone() - k_s.clone() + S::one()) / k_s);
    }
    out
}

/// Expansion of bcheck_0(r)^a in the plane-wave variable w = e^{i r} and the
/// squared nome, as a map from w-exponent to q^2-series.  Negative
/// w-exponents only arise from the (1 - q^{2n}/w) factors and therefore
/// carry at least one power of q^2 per unit, so the support is bounded
/// below by -order; above it is cut at k_max.  The flag reports whether the
/// cut dropped nonzero coefficients (always true for exponents that are not
/// small non-negative integers, since (1 - w)^a is then an infinite series).
pub(crate) fn b_expansion_map<S: Scalar>(
    exponent: &S,
    order: usize,
    k_max: usize,
) -> (BTreeMap<i64, QSeries<S>>, bool) {
    // Intermediate products may overshoot k_max by what later negative-power
    // factors can pull back down, which is at most `order` units.
    let hi = k_max as i64 + order as i64;
    let lo = -(order as i64);

    let binom = binomial_coefficients(exponent, k_max + order + 1);
    let truncated = !binom.iter().take(k_max + 2).any(|c| c.is_zero());

    // (1 - w)^a
    let mut acc: BTreeMap<i64, QSeries<S>> = BTreeMap::new();
    let mut sign = S::one();
    for (k, c) in binom.iter().enumerate() {
        let e = k as i64;
        if e > hi {
            break;
        }
        let coeff = c.clone() * sign.clone();
        sign = -sign;
        if !coeff.is_zero() {
            acc.insert(e, QSeries::constant(order, coeff));
        }
    }

    // (1 - q^{2n} w)^a and (1 - q^{2n} / w)^a for n = 1..=order; factors with
    // n > order only contribute beyond the q^2 truncation.
    for n in 1..=order {
        for dir in [1i64, -1i64] {
            let mut factor: BTreeMap<i64, QSeries<S>> = BTreeMap::new();
            let mut sign = S::one();
            for (k, c) in binom.iter().enumerate() {
                if k * n > order {
                    break;
                }
                let coeff = c.clone() * sign.clone();
                sign = -sign;
                if !coeff.is_zero() {
                    factor.insert(dir * k as i64, QSeries::monomial(order, k * n, coeff));
                }
            }
            acc = convolve_maps(&acc, &factor, lo, hi);
        }
    }

    acc.retain(|e, series| *e <= k_max as i64 && !series.is_zero());
    (acc, truncated)
}

fn convolve_maps<S: Scalar>(
    a: &BTreeMap<i64, QSeries<S>>,
    b: &BTreeMap<i64, QSeries<S>>,
    lo: i64,
    hi: i64,
) -> BTreeMap<i64, QSeries<S>> {
    let mut out: BTreeMap<i64, QSeries<S>> = BTreeMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = ea + eb;
            if e < lo || e > hi {
                continue;
            }
            let prod = ca.mul(cb);
            if prod.is_zero() {
                continue;
            }
            match out.get_mut(&e) {
                Some(existing) => *existing = existing.add(&prod),
                None => {
                    out.insert(e, prod);
                }
            }
        }
    }
    out.retain(|_, s| !s.is_zero());
    out
}

/// Result of expanding bcheck_0^a: a one-variable Laurent polynomial in w
/// with q^2-series coefficients, plus a flag warning that coefficients
/// beyond the w-cutoff were dropped.
#[derive(Debug, Clone)]
pub struct BExpansion<S> {
    pub poly: LaurentPoly<S>,
    pub truncated: bool,
}

/// Expands bcheck_0(r)^exponent = [(1-w) prod_n (1-q^{2n}w)(1-q^{2n}/w)]^exponent
/// in w = e^{i r}, keeping w-exponents in [-order, k_max] and q^2-orders up
/// to `order`.
pub fn check_b_expansion<S: Scalar>(exponent: &S, order: usize, k_max: usize) -> BExpansion<S> {
    let (map, truncated) = b_expansion_map(exponent, order, k_max);
    let mut poly = LaurentPoly::zero(1, order);
    for (e, series) in map {
        poly.add_term(vec![e], series);
    }
    BExpansion { poly, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const T: usize = DEFAULT_PRODUCT_TERMS;

    fn th(u: f64, q: f64, terms: usize) -> f64 {
        theta1(u, q, terms).unwrap().re
    }

    #[test]
    fn theta_reduces_to_sine_at_q_zero() {
        assert!((th(PI / 2.0, 0.0, 10) - 1.0).abs() < 1e-15);
        for &u in &[0.3, 1.0, 2.5] {
            assert!((th(u, 0.0, 10) - u.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_is_odd() {
        let (u, q) = (0.7, 0.3);
        assert!((th(u, q, T) + th(-u, q, T)).abs() < 1e-15);
    }

    #[test]
    fn theta_matches_classical_series() {
        // Classical sum 2 sum_k (-1)^k q^{(k+1/2)^2} sin((2k+1)u) equals the
        // product form times 2 q^{1/4} prod (1 - q^{2n}); dividing it out
        // recovers the unit-constant normalization used here.
        let (u, q): (f64, f64) = (0.9, 0.25);
        let mut series = 0.0;
        for k in 0..60u32 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let half = k as f64 + 0.5;
            series += 2.0 * sign * q.powf(half * half) * ((2 * k + 1) as f64 * u).sin();
        }
        let mut euler = 1.0;
        for n in 1..=200 {
            euler *= 1.0 - q.powi(2 * n);
        }
        let reference = series / (2.0 * q.powf(0.25) * euler);
        assert!((th(u, q, 40) - reference).abs() < 1e-12);
    }

    #[test]
    fn theta_rejects_bad_nome() {
        assert!(theta1(0.5, 1.0, 10).is_err());
        assert!(theta1(0.5, -0.1, 10).is_err());
        assert!(theta1(0.5, 0.2, 0).is_err());
    }

    #[test]
    fn product_tail_bound_controls_truncation() {
        let q = 0.5;
        let coarse = th(0.8, q, 8);
        let fine = th(0.8, q, 200);
        let bound = product_tail_bound(q, 8);
        assert!(product_tail_bound(q, 16) < bound);
        assert!((coarse - fine).abs() <= bound * fine.abs());
    }

    #[test]
    fn log_derivative_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..50 {
            let u: f64 = rng.gen_range(0.2..PI - 0.2);
            let q: f64 = rng.gen_range(0.0..0.6);
            let analytic = theta1_log_derivative(u, q, T).unwrap();
            let fd = ((th(u + h, q, T)).ln() - (th(u - h, q, T)).ln()) / (2.0 * h);
            assert!(
                (analytic - fd).abs() < 1e-7,
                "u={u} q={q}: {analytic} vs {fd}"
            );
        }
    }

    #[test]
    fn potential_sutherland_values() {
        assert!((potential_v(PI, 0.0, 10).unwrap() - 0.25).abs() < 1e-15);
        let r = 1.1;
        assert!(
            (potential_v(r, 0.0, 10).unwrap() - potential_v(-r, 0.0, 10).unwrap()).abs() < 1e-15
        );
        let mut x = 0.1;
        while x < 2.0 * PI - 0.1 {
            let closed = 0.25 / (x / 2.0).sin().powi(2);
            assert!((potential_v(x, 0.0, 10).unwrap() - closed).abs() < 1e-13 * closed.max(1.0));
            x += 0.17;
        }
    }

    #[test]
    fn potential_even_and_periodic() {
        let (r, q) = (1.3, 0.35);
        let v = potential_v(r, q, T).unwrap();
        assert!((v - potential_v(-r, q, T).unwrap()).abs() < 1e-12);
        assert!((v - potential_v(r + 2.0 * PI, q, T).unwrap()).abs() < 1e-11);
    }

    #[test]
    fn potential_matches_log_theta_differences() {
        // Central second difference of -log theta1(r/2) in r.
        let (r, q) = (1.3, 0.3);
        let h = 1e-4;
        let f = |x: f64| th(x / 2.0, q, T).ln();
        let fd = -(f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h);
        assert!((potential_v(r, q, 50).unwrap() - fd).abs() < 1e-6);
    }

    #[test]
    fn potential_pole_detected() {
        assert!(matches!(
            potential_v(0.0, 0.2, T),
            Err(Error::Pole { .. })
        ));
        assert!(potential_v(2.0 * PI, 0.2, T).is_err());
    }

    #[test]
    fn potential_q_correction_matches_fourier_series() {
        // V(r, q) - V(r, 0) = -2 sum_n n s_n^2 cos(n r), an absolutely
        // convergent series once the Sutherland part is subtracted.
        let (r, q): (f64, f64) = (1.3, 0.3);
        let lhs = potential_v(r, q, T).unwrap() - potential_v(r, 0.0, T).unwrap();
        let mut rhs = 0.0;
        for n in 1..=60 {
            let a = q.powi(2 * n);
            rhs -= 2.0 * n as f64 * (a / (1.0 - a)) * (n as f64 * r).cos();
        }
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn fourier_coefficient_examples() {
        let table = potential_fourier_coefficients::<f64>(4, 3);
        let (fwd1, bwd1) = &table[0];
        assert_eq!(fwd1.coeffs(), &[1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(bwd1.coeffs(), &[0.0, 1.0, 1.0, 1.0, 1.0]);
        // s_2^2 = q^4 + q^8 + ...: nothing at q^2, unit coefficient at q^4.
        let s2 = bogoliubov_s_squared::<f64>(2, 4);
        assert_eq!(s2.coeffs(), &[0.0, 0.0, 1.0, 0.0, 1.0]);
        for (n, (fwd, bwd)) in table.iter().enumerate() {
            let diff = fwd.sub(bwd);
            let mut expect = QSeries::zero(4);
            expect = expect.add(&QSeries::constant(4, (n + 1) as f64));
            assert_eq!(diff, expect);
        }
    }

    #[test]
    fn exact_fourier_coefficients() {
        let table = potential_fourier_coefficients::<BigRational>(6, 2);
        let (fwd2, bwd2) = &table[1];
        assert_eq!(bwd2.coeff(2), &BigRational::from_int(2));
        assert_eq!(fwd2.coeff(0), &BigRational::from_int(2));
        assert_eq!(fwd2.coeff(4), &BigRational::from_int(2));
    }

    #[test]
    fn zeta_is_odd_and_quasi_periodic() {
        let (r, q) = (0.8, 0.3);
        let z = weierstrass_zeta(r, q, T).unwrap();
        assert!((z + weierstrass_zeta(-r, q, T).unwrap()).abs() < 1e-13);
        let shifted = weierstrass_zeta(r + 2.0 * PI, q, T).unwrap();
        assert!((shifted - z - 2.0 * eta1(q, T).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn zeta_and_p_reduce_at_q_zero() {
        let r: f64 = 1.7;
        let zeta0 = r / 12.0 + 0.5 / (r / 2.0).tan();
        assert!((weierstrass_zeta(r, 0.0, T).unwrap() - zeta0).abs() < 1e-13);
        let p0 = 0.25 / (r / 2.0).sin().powi(2) - 1.0 / 12.0;
        assert!((weierstrass_p(r, 0.0, T).unwrap() - p0).abs() < 1e-13);
    }

    #[test]
    fn p_is_negative_derivative_of_zeta() {
        let (r, q) = (1.1, 0.4);
        let h = 1e-5;
        let fd = (weierstrass_zeta(r + h, q, T).unwrap() - weierstrass_zeta(r - h, q, T).unwrap())
            / (2.0 * h);
        assert!((weierstrass_p(r, q, T).unwrap() + fd).abs() < 1e-7);
    }

    #[test]
    fn p_minus_potential_is_constant() {
        let q = 0.2;
        let d1 = weierstrass_p(0.5, q, T).unwrap() - potential_v(0.5, q, T).unwrap();
        let d2 = weierstrass_p(2.0, q, T).unwrap() - potential_v(2.0, q, T).unwrap();
        assert!((d1 - d2).abs() < 1e-10);
        assert!((d1 - p_minus_v_constant(q, T).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn p_matches_lattice_sum() {
        // wp(z) = 1/z^2 + sum_{omega != 0} [ 1/(z-omega)^2 - 1/omega^2 ]
        // over omega = 2 pi m + i beta n, truncated at |m|, |n| <= 50.
        let (z, q): (f64, f64) = (1.0, 0.25);
        let beta = -2.0 * q.ln();
        let mut sum = Complex64::new(1.0 / (z * z), 0.0);
        for m in -50i64..=50 {
            for n in -50i64..=50 {
                if m == 0 && n == 0 {
                    continue;
                }
                let w = Complex64::new(2.0 * PI * m as f64, beta * n as f64);
                let d = Complex64::new(z, 0.0) - w;
                sum += 1.0 / (d * d) - 1.0 / (w * w);
            }
        }
        let p = weierstrass_p(z, q, T).unwrap();
        assert!(sum.im.abs() < 1e-10);
        assert!((p - sum.re).abs() < 5e-4, "{p} vs {sum}");
    }

    #[test]
    fn b_factor_proportional_to_theta() {
        let q = 0.3;
        let mut ratios = Vec::new();
        for k in 1..=20 {
            let r = 0.25 * k as f64;
            let b = b_factor(r, q, T).unwrap();
            let t = theta1(r / 2.0, q, T).unwrap();
            ratios.push(b / t);
        }
        let first = ratios[0];
        assert!((first - Complex64::new(0.0, -2.0)).norm() < 1e-14);
        let spread = ratios
            .iter()
            .map(|r| (r - first).norm())
            .fold(0.0, f64::max);
        assert!(spread < 1e-11 * first.norm());
    }

    #[test]
    fn b_log_exponentiates_to_b_factor() {
        let q = 0.35;
        for &r in &[0.4, 2.0, 5.5, 7.0, -1.2, -4.0] {
            let direct = b_factor(r, q, T).unwrap();
            let via_log = b_factor_log(r, q, T).unwrap().exp();
            assert!((direct - via_log).norm() < 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn b_log_derivative_matches_differences() {
        let (r, q) = (1.9, 0.25);
        let h = 1e-5;
        let fd = (b_factor_log(r + h, q, T).unwrap().re - b_factor_log(r - h, q, T).unwrap().re)
            / (2.0 * h);
        assert!((b_log_derivative(r, q, T).unwrap() - fd).abs() < 1e-7);
    }

    #[test]
    fn binomial_recurrence_closes_for_integers() {
        let b = binomial_coefficients(&3.0f64, 6);
        assert_eq!(b, vec![1.0, 3.0, 3.0, 1.0, 0.0, 0.0, 0.0]);
        let half = BigRational::from_ratio(1, 2);
        let bh = binomial_coefficients(&half, 2);
        assert_eq!(bh[1], half);
        assert_eq!(bh[2], BigRational::from_ratio(-1, 8));
    }

    #[test]
    fn expansion_trivial_cases() {
        // (1 - w)^1 at order 0: coefficients 1, -1.
        let e = check_b_expansion(&1.0f64, 0, 4);
        assert!(!e.truncated);
        assert_eq!(e.poly.coeff_at(&[0]).coeff(0), &1.0);
        assert_eq!(e.poly.coeff_at(&[1]).coeff(0), &-1.0);
        assert!(e.poly.coeff_at(&[2]).is_zero());

        // Geometric series (1 - w)^{-1} at order 0, cut at w^5.
        let g = check_b_expansion(&-1.0f64, 0, 5);
        assert!(g.truncated);
        for k in 0..=5 {
            assert_eq!(g.poly.coeff_at(&[k]).coeff(0), &1.0);
        }
    }

    #[test]
    fn expansion_matches_brute_force_product() {
        // Coefficient of w^1 q^2 in (1-w)^a (1-q^2 w)^a (1-q^2/w)^a at
        // a = -3/2, multiplying three truncated binomial series directly.
        let a = -1.5f64;
        let order = 2;
        let k_max = 8;
        let e = check_b_expansion(&a, order, k_max);
        let binom = binomial_coefficients(&a, 12);
        let term = |k: usize| binom[k] * if k % 2 == 0 { 1.0 } else { -1.0 };
        // (1-w)^a gives w^j with coefficient term(j); (1-q^2 w)^a gives
        // w^k q^{2k} term(k); (1-q^2/w)^a gives w^{-l} q^{2l} term(l).
        // w^1 q^2 needs (j,k,l) with j+k-l = 1 and k+l = 1.
        let brute = term(2) * term(0) * term(1) + term(0) * term(1) * term(0);
        assert!((e.poly.coeff_at(&[1]).coeff(1) - brute).abs() < 1e-12);
    }

    #[test]
    fn expansion_inverse_pairs_cancel() {
        // The product of the expansions with exponents a and -a equals 1 on
        // the window where the cut cannot leak: negative powers cost q^2
        // per unit, so coefficients of w^e for e <= k_max - order are exact.
        let a = BigRational::from_ratio(3, 2);
        let order = 3;
        let k_max = 9;
        let plus = check_b_expansion(&a, order, k_max);
        let minus = check_b_expansion(&(-a), order, k_max);
        let product = plus.poly.mul(&minus.poly);
        for e in -(order as i64)..=(k_max - order) as i64 {
            let c = product.coeff_at(&[e]);
            for l in 0..=order {
                let expect = if e == 0 && l == 0 {
                    BigRational::from_int(1)
                } else {
                    BigRational::from_int(0)
                };
                assert_eq!(c.coeff(l), &expect, "w^{e} q^{}", 2 * l);
            }
        }
    }

    #[test]
    fn eta1_sutherland_value() {
        assert!((eta1(0.0, 10).unwrap() - PI / 12.0).abs() < 1e-15);
    }
}
