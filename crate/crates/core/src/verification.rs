//! Independent checks: the two-family correlation identity, the Weierstrass
//! zeta identity, pointwise eigen-residuals of assembled eigenfunctions, and
//! two diagonalization oracles (plane-wave lattice and symmetric-monomial).
//!
//! The correlation identity states that
//!
//! ```text
//!   sum_j (d^2/dx_j^2 - d^2/dy_j^2) F(x; y)
//!     = 2 lambda (lambda - 1) sum_{j<k} [wp(x_j - x_k) - wp(y_j - y_k)] F(x; y)
//! ```
//!
//! for F = prod_{j<k} theta1((x_k-x_j)/2)^lambda theta1((y_j-y_k)/2)^lambda
//! / prod_{j,k} theta1((x_j-y_k)/2)^lambda.  It is checked two independent
//! ways: analytically, by expanding d log F in theta1'/theta1 terms (so that
//! d^2 F = F [(d log F)^2 + d^2 log F]), and by fourth-order central finite
//! differences applied to F itself.  The zeta identity
//! [zeta(x)+zeta(y)+zeta(z)]^2 = wp(x)+wp(y)+wp(z) for x+y+z = 0 is the
//! elementary route to the same structure.
//!
//! The eigen-residual applies the full Hamiltonian to an assembled
//! eigenfunction psi = J * Delta * e^{ic sum x} analytically (polynomial
//! derivatives, Delta log-derivatives, phase) and reports
//! |H psi - E(q) psi| / |psi| per nome, plus the empirical scaling exponent
//! of the residual in q, expected near 2(L+1) for a solution truncated at
//! q^2-order L.
//!
//! The lattice oracle diagonalizes the Hamiltonian on the total-momentum
//! sector through the given mode vector.  In the plane-wave basis the
//! regularized pair potential hops with asymmetric weights n c_n^2 forward
//! and n s_n^2 backward; conjugating by diag(q^t) turns both into the
//! symmetric hop n q^n / (1 - q^{2n}), and the Hermiticity of the conjugated
//! matrix is asserted entry by entry rather than assumed.  The monomial
//! oracle diagonalizes the conjugated trigonometric operator in the
//! symmetric-monomial basis exactly, providing reference coefficients for
//! the q = 0 limit of the eigenfunctions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::elliptic_core::{
    potential_v, theta1, theta1_log_derivative, weierstrass_p, weierstrass_zeta, Lambda,
    ModelParameters, DEFAULT_PRODUCT_TERMS,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series_algebra::LaurentPoly;
use crate::spectrum_recursion::{energy_zero_scalar, is_highest_weight, quasi_momenta};
use crate::wavefunction::{delta_log_gradient, delta_log_hessian_diagonal, EllipticJack};

/// Minimum pairwise wrapped distance between sampled coordinates.
pub const MIN_SEPARATION: f64 = 0.1;

/// Step for the fourth-order finite-difference fallback.  Large enough to
/// sit well above the rounding floor of the stencil (which scales as 1/h^2),
/// small enough that the h^4 truncation term stays below 1e-8 at the minimum
/// separation enforced by the samplers.
pub const FD_STEP: f64 = 4e-4;

/// Derivative strategy for the identity checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytic,
    FiniteDifference,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::FiniteDifference => "finite-difference",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "analytic" => Ok(Method::Analytic),
            "fd" | "finite-difference" => Ok(Method::FiniteDifference),
            other => Err(Error::InvalidParameter(format!(
                "unknown derivative method {other:?} (expected analytic or fd)"
            ))),
        }
    }
}

/// Residual summary for an identity check.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub parameters: String,
    pub method: Method,
    pub seed: u64,
    pub sample_points: Vec<(Vec<f64>, Vec<f64>)>,
    /// Relative residual per sample, parallel to `sample_points`.
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
}

impl IdentityReport {
    pub fn sample_count(&self) -> usize {
        self.sample_points.len()
    }

    pub fn to_json(&self) -> String {
        let residuals = self
            .residuals
            .iter()
            .map(|r| format!("{r:e}"))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{{\"parameters\":\"{}\",\"method\":\"{}\",\"seed\":{},\"samples\":{},\"max_abs_residual\":{:e},\"max_rel_residual\":{:e},\"residuals\":[{}]}}",
            self.parameters,
            self.method.label(),
            self.seed,
            self.sample_count(),
            self.max_abs_residual,
            self.max_rel_residual,
            residuals
        )
    }
}

fn wrapped_distance(a: f64, b: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let d = (a - b).rem_euclid(two_pi);
    d.min(two_pi - d)
}

fn well_separated(points: &[f64], min_sep: f64) -> bool {
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if wrapped_distance(*a, *b) < min_sep {
                return false;
            }
        }
    }
    true
}

/// One configuration drawn uniformly from the ordered sector
/// -pi < x_1 < ... < x_N < pi with all wrapped pair distances >= min_sep.
pub fn sample_ordered_sector(rng: &mut StdRng, n: usize, min_sep: f64) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
        x.sort_by(f64::total_cmp);
        if well_separated(&x, min_sep) {
            return x;
        }
    }
}

/// A pair of ordered configurations with every coordinate (within and
/// across the two families) separated, keeping all theta factors of the
/// correlation function away from their zeros.
fn sample_identity_pair(rng: &mut StdRng, n: usize, min_sep: f64) -> (Vec<f64>, Vec<f64>) {
    loop {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
        let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let mut all = x.clone();
        all.extend_from_slice(&y);
        if well_separated(&all, min_sep) {
            return (x, y);
        }
    }
}

/// log F as a sum of per-factor principal logarithms.  Each factor stays on
/// one side of zero throughout a finite-difference stencil (separation far
/// exceeds the step), so the branch is locally constant and exp(log F) is
/// smooth wherever it is used.
fn correlation_log_f(x: &[f64], y: &[f64], lambda: f64, q: f64) -> Result<Complex64> {
    let t = DEFAULT_PRODUCT_TERMS;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..x.len() {
        for k in (j + 1)..x.len() {
            acc += theta1((x[k] - x[j]) / 2.0, q, t)?.ln();
            acc += theta1((y[j] - y[k]) / 2.0, q, t)?.ln();
        }
    }
    for xj in x {
        for yk in y {
            acc -= theta1((xj - yk) / 2.0, q, t)?.ln();
        }
    }
    Ok(acc * lambda)
}

fn correlation_f(x: &[f64], y: &[f64], lambda: f64, q: f64) -> Result<Complex64> {
    Ok(correlation_log_f(x, y, lambda, q)?.exp())
}

/// Left side of the identity divided by F, from log-derivatives:
/// sum_j [(d_{x_j} log F)^2 + d^2_{x_j} log F - (x -> y)], with
/// d log F expanded in theta1'/theta1 and d^2 log F in pair-potential
/// values via (log theta1(r/2))'' = -V(r).
fn analytic_lhs_over_f(x: &[f64], y: &[f64], lambda: f64, q: f64) -> Result<f64> {
    let t = DEFAULT_PRODUCT_TERMS;
    let kappa = |r: f64| theta1_log_derivative(r / 2.0, q, t);
    let n = x.len();
    let mut acc = 0.0;
    for m in 0..n {
        let mut dx = 0.0;
        let mut ddx = 0.0;
        for j in 0..n {
            if j != m {
                dx += kappa(x[m] - x[j])?;
                ddx -= potential_v(x[m] - x[j], q, t)?;
            }
        }
        for yk in y {
            dx -= kappa(x[m] - yk)?;
            ddx += potential_v(x[m] - yk, q, t)?;
        }
        dx *= lambda / 2.0;
        ddx *= lambda;

        let mut dy = 0.0;
        let mut ddy = 0.0;
        for k in 0..n {
            if k != m {
                dy += kappa(y[m] - y[k])?;
                ddy -= potential_v(y[m] - y[k], q, t)?;
            }
        }
        for xj in x {
            dy += kappa(xj - y[m])?;
            ddy += potential_v(xj - y[m], q, t)?;
        }
        dy *= lambda / 2.0;
        ddy *= lambda;

        // Pairing the squares and the Laplacian parts keeps the one-particle
        // case an exact floating-point zero: there dx = -dy and ddx = ddy
        // bitwise, so both parentheses vanish identically.
        acc += (dx * dx - dy * dy) + (ddx - ddy);
    }
    Ok(acc)
}

/// Right side divided by F: 2 lambda (lambda-1) sum_{j<k} [wp(x) - wp(y)].
fn rhs_over_f(x: &[f64], y: &[f64], gamma: f64, q: f64) -> Result<f64> {
    let t = DEFAULT_PRODUCT_TERMS;
    let mut acc = 0.0;
    for j in 0..x.len() {
        for k in (j + 1)..x.len() {
            acc += weierstrass_p(x[j] - x[k], q, t)?;
            acc -= weierstrass_p(y[j] - y[k], q, t)?;
        }
    }
    Ok(gamma * acc)
}

/// log of F(one coordinate shifted)/F(unshifted).  Only the factors that
/// contain the shifted coordinate survive the quotient, so the sum runs over
/// those 2N-1 factors, each keeping its original argument orientation.
fn shifted_log_ratio(
    x: &[f64],
    y: &[f64],
    lambda: f64,
    q: f64,
    x_family: bool,
    index: usize,
    shift: f64,
) -> Result<Complex64> {
    let t = DEFAULT_PRODUCT_TERMS;
    let term = |base: f64, moved: f64| -> Result<Complex64> {
        Ok(theta1(moved, q, t)?.ln() - theta1(base, q, t)?.ln())
    };
    let m = index;
    let mut acc = Complex64::new(0.0, 0.0);
    if x_family {
        for (j, xj) in x.iter().enumerate() {
            if j < m {
                acc += term((x[m] - xj) / 2.0, (x[m] + shift - xj) / 2.0)?;
            } else if j > m {
                acc += term((xj - x[m]) / 2.0, (xj - x[m] - shift) / 2.0)?;
            }
        }
        for yk in y {
            acc -= term((x[m] - yk) / 2.0, (x[m] + shift - yk) / 2.0)?;
        }
    } else {
        for (k, yk) in y.iter().enumerate() {
            if k > m {
                acc += term((y[m] - yk) / 2.0, (y[m] + shift - yk) / 2.0)?;
            } else if k < m {
                acc += term((yk - y[m]) / 2.0, (yk - y[m] - shift) / 2.0)?;
            }
        }
        for xj in x {
            acc -= term((xj - y[m]) / 2.0, (xj - y[m] - shift) / 2.0)?;
        }
    }
    Ok(acc * lambda)
}

/// Fourth-order stencil for F''/F along one coordinate.  Each stencil point
/// is the ratio F(shifted)/F, exponentiated from the log difference of the
/// changed factors alone; the unchanged factors cancel exactly, so the
/// subtractive noise tracks a handful of factors instead of the full pair
/// product, and the center point is 1 with no rounding at all.
fn fd_second_derivative_over_f(
    x: &[f64],
    y: &[f64],
    lambda: f64,
    q: f64,
    x_family: bool,
    index: usize,
) -> Result<Complex64> {
    let g = |shift: f64| -> Result<Complex64> {
        Ok(shifted_log_ratio(x, y, lambda, q, x_family, index, shift)?.exp())
    };
    let h = FD_STEP;
    let g2p = g(2.0 * h)?;
    let g1p = g(h)?;
    let g1m = g(-h)?;
    let g2m = g(-2.0 * h)?;
    Ok((-g2p + 16.0 * g1p - 30.0 + 16.0 * g1m - g2m) / (12.0 * h * h))
}

/// Checks the correlation identity on seeded random configurations.
/// Relative residuals are normalized by |F| times the larger side's scale.
pub fn check_remarkable_identity(
    params: &ModelParameters,
    samples: usize,
    seed: u64,
    method: Method,
) -> Result<IdentityReport> {
    let n = params.n_particles();
    let lambda = params.lambda_f64();
    let q = params.nome();
    let gamma = params.gamma();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut sample_points = Vec::with_capacity(samples);
    let mut residuals = Vec::with_capacity(samples);
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for _ in 0..samples {
        let (x, y) = sample_identity_pair(&mut rng, n, MIN_SEPARATION);
        let f = correlation_f(&x, &y, lambda, q)?;
        let rhs = rhs_over_f(&x, &y, gamma, q)?;
        let lhs: Complex64 = match method {
            Method::Analytic => Complex64::new(analytic_lhs_over_f(&x, &y, lambda, q)?, 0.0),
            Method::FiniteDifference => {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += fd_second_derivative_over_f(&x, &y, lambda, q, true, j)?;
                    acc -= fd_second_derivative_over_f(&x, &y, lambda, q, false, j)?;
                }
                acc
            }
        };
        let difference = lhs - Complex64::new(rhs, 0.0);
        let abs = (difference * f).norm();
        let scale = lhs.norm().max(rhs.abs()).max(1.0);
        let rel = difference.norm() / scale;
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
        sample_points.push((x, y));
        residuals.push(rel);
    }
    Ok(IdentityReport {
        parameters: format!("N={} lambda={} q={}", n, params.lambda().render(), q),
        method,
        seed,
        sample_points,
        residuals,
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
    })
}

/// Checks [zeta(x)+zeta(y)+zeta(z)]^2 = wp(x)+wp(y)+wp(z) on seeded samples
/// with z = -x-y and all three arguments kept off the period lattice.
pub fn check_zeta_identity(q: f64, samples: usize, seed: u64) -> Result<IdentityReport> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut sample_points = Vec::with_capacity(samples);
    let mut residuals = Vec::with_capacity(samples);
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for _ in 0..samples {
        let (x, y, z) = loop {
            let x = rng.gen_range(-PI..PI);
            let y = rng.gen_range(-PI..PI);
            let z = -x - y;
            if wrapped_distance(x, 0.0) >= MIN_SEPARATION
                && wrapped_distance(y, 0.0) >= MIN_SEPARATION
                && wrapped_distance(z, 0.0) >= MIN_SEPARATION
            {
                break (x, y, z);
            }
        };
        let (abs, rel) = zeta_identity_residual(x, y, z, q)?;
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
        sample_points.push((vec![x, y], vec![z]));
        residuals.push(abs);
    }
    Ok(IdentityReport {
        parameters: format!("q={q}"),
        method: Method::Analytic,
        seed,
        sample_points,
        residuals,
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
    })
}

/// Absolute and relative residual of the zeta identity at one triple.
pub fn zeta_identity_residual(x: f64, y: f64, z: f64, q: f64) -> Result<(f64, f64)> {
    let t = DEFAULT_PRODUCT_TERMS;
    let zeta_sum =
        weierstrass_zeta(x, q, t)? + weierstrass_zeta(y, q, t)? + weierstrass_zeta(z, q, t)?;
    let p_sum = weierstrass_p(x, q, t)? + weierstrass_p(y, q, t)? + weierstrass_p(z, q, t)?;
    let abs = (zeta_sum * zeta_sum - p_sum).abs();
    Ok((abs, abs / p_sum.abs().max(1.0)))
}

/// Per-nome residual of the eigen-equation.
#[derive(Debug, Clone)]
pub struct QResidual {
    pub q: f64,
    pub max_residual: f64,
}

/// Eigen-residual summary across nomes.
#[derive(Debug, Clone)]
pub struct EigenReport {
    pub per_q: Vec<QResidual>,
    /// Least-squares slope of log(max residual) against log q over the
    /// positive nomes; None with fewer than two usable points.
    pub scaling_exponent: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl EigenReport {
    pub fn max_residual_at(&self, q: f64) -> Option<f64> {
        self.per_q
            .iter()
            .find(|r| r.q == q)
            .map(|r| r.max_residual)
    }

    pub fn to_json(&self) -> String {
        let rows = self
            .per_q
            .iter()
            .map(|r| format!("{{\"q\":{},\"max_residual\":{:e}}}", r.q, r.max_residual))
            .collect::<Vec<_>>()
            .join(",");
        let slope = match self.scaling_exponent {
            Some(s) => format!("{s}"),
            None => "null".into(),
        };
        format!(
            "{{\"samples\":{},\"seed\":{},\"scaling_exponent\":{},\"per_q\":[{}]}}",
            self.samples, self.seed, slope, rows
        )
    }
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Applies the Hamiltonian to psi = J Delta e^{ic sum x} at one point and
/// returns |H psi - E psi| / |psi|, all computed relative to the common
/// factor Delta e^{ic sum x}:
///
/// ```text
///   H psi / W = -sum_j [ J_jj + 2 J_j (G_j + ic) + J ((G_j + ic)^2 + H_j) ]
///               + gamma sum_{j<k} V(x_j - x_k) J,
/// ```
///
/// with G, H the gradient and diagonal Hessian of log Delta.
fn eigen_residual_at_point<S: Scalar>(
    jack: &EllipticJack<S>,
    params_q: &ModelParameters,
    x: &[f64],
    energy: f64,
) -> Result<Option<f64>> {
    let q = params_q.nome();
    let eval = jack.poly.evaluate_with_derivatives(x, q);
    let value = eval.value;
    let scale: f64 = jack
        .poly
        .terms()
        .map(|(_, c)| c.eval(q).abs())
        .sum::<f64>()
        .max(1e-300);
    if value.norm() < 1e-8 * scale {
        return Ok(None);
    }
    let grad_log_delta = delta_log_gradient(x, params_q)?;
    let hess_log_delta = delta_log_hessian_diagonal(x, params_q)?;
    let c = jack.com_exponent;
    let mut h_over_w = Complex64::new(0.0, 0.0);
    for m in 0..x.len() {
        let g = Complex64::new(grad_log_delta[m], c);
        h_over_w -= eval.second_diagonal[m]
            + 2.0 * eval.gradient[m] * g
            + value * (g * g + Complex64::new(hess_log_delta[m], 0.0));
    }
    let gamma = params_q.gamma();
    for j in 0..x.len() {
        for k in (j + 1)..x.len() {
            h_over_w += gamma * potential_v(x[j] - x[k], q, DEFAULT_PRODUCT_TERMS)? * value;
        }
    }
    Ok(Some((h_over_w - energy * value).norm() / value.norm()))
}

/// Evaluates the eigen-residual of an assembled eigenfunction over seeded
/// sample points, one sweep per requested nome, and fits the scaling
/// exponent of the residual in q.
pub fn eigen_residual<S: Scalar>(
    jack: &EllipticJack<S>,
    q_values: &[f64],
    samples: usize,
    seed: u64,
) -> Result<EigenReport> {
    let big_n = jack.params.n_particles();
    let mut rng = StdRng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..samples)
        .map(|_| sample_ordered_sector(&mut rng, big_n, MIN_SEPARATION))
        .collect();
    let mut per_q = Vec::with_capacity(q_values.len());
    for &q in q_values {
        let params_q = ModelParameters::new(big_n, jack.params.lambda().clone(), q)?;
        let energy = jack.energy.eval(q);
        let mut max_residual = 0.0f64;
        for x in &points {
            let mut point = x.clone();
            let mut attempts = 0;
            let residual = loop {
                match eigen_residual_at_point(jack, &params_q, &point, energy)? {
                    Some(r) => break r,
                    None => {
                        attempts += 1;
                        if attempts > 100 {
                            return Err(Error::InvalidParameter(
                                "eigenfunction vanished on every resampled point".into(),
                            ));
                        }
                        point = sample_ordered_sector(&mut rng, big_n, MIN_SEPARATION);
                    }
                }
            };
            max_residual = max_residual.max(residual);
        }
        per_q.push(QResidual { q, max_residual });
    }
    let log_points: Vec<(f64, f64)> = per_q
        .iter()
        .filter(|r| r.q > 0.0 && r.max_residual > 0.0)
        .map(|r| (r.q.ln(), r.max_residual.ln()))
        .collect();
    let scaling_exponent = if log_points.len() >= 2 {
        Some(fit_slope(&log_points))
    } else {
        None
    };
    Ok(EigenReport {
        per_q,
        scaling_exponent,
        samples,
        seed,
    })
}

/// Result of the plane-wave lattice diagonalization.
#[derive(Debug, Clone)]
pub struct GalerkinReport {
    /// Sorted eigenvalues from the refined run (cutoff + 8).
    pub eigenvalues: Vec<f64>,
    /// Largest relative mismatch between the two one-sided hop weights
    /// after conjugation; algebraically zero.
    pub hermiticity_defect: f64,
    /// Largest shift of the low-lying eigenvalues between the base and
    /// refined cutoffs.
    pub drift: f64,
    pub cutoff: usize,
}

impl GalerkinReport {
    /// The eigenvalue nearest a reference energy.
    pub fn nearest(&self, energy: f64) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| (a - energy).abs().total_cmp(&(b - energy).abs()))
            .expect("eigenvalue list is never empty")
    }

    pub fn to_json(&self) -> String {
        let eigs = self
            .eigenvalues
            .iter()
            .map(|e| format!("{e}"))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{{\"cutoff\":{},\"hermiticity_defect\":{:e},\"drift\":{:e},\"eigenvalues\":[{}]}}",
            self.cutoff, self.hermiticity_defect, self.drift, eigs
        )
    }
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[i][j].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let app = a[p][p];
                let aqq = a[q][q];
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[p][i] = a[i][p];
                    a[i][q] = s * aip + c * aiq;
                    a[q][i] = a[i][q];
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eigs.sort_by(f64::total_cmp);
    eigs
}

/// Sorted spectrum of the lattice Hamiltonian at one cutoff, together with
/// the worst hop-weight mismatch (the Hermiticity defect).
fn lattice_spectrum(params: &ModelParameters, n: &[i64], cutoff: usize) -> Result<(Vec<f64>, f64)> {
    let big_n = params.n_particles();
    let lambda = params.lambda_f64();
    let q = params.nome();
    let gamma = params.gamma();
    let momenta = quasi_momenta(n, lambda);
    if big_n == 1 {
        let mut eigs: Vec<f64> = (-(cutoff as i64)..=cutoff as i64)
            .map(|t| (momenta[0] + t as f64) * (momenta[0] + t as f64))
            .collect();
        eigs.sort_by(f64::total_cmp);
        return Ok((eigs, 0.0));
    }
    let diagonal = |t: i64| -> f64 {
        let p1 = momenta[0] + t as f64;
        let p2 = momenta[1] - t as f64;
        p1 * p1 + p2 * p2
    };
    if q == 0.0 {
        // Trigonometric limit: the one-sided matrix on the physical
        // half-lattice t >= 0 is triangular, so the spectrum is its
        // diagonal.
        let mut eigs: Vec<f64> = (0..=cutoff as i64).map(diagonal).collect();
        eigs.sort_by(f64::total_cmp);
        return Ok((eigs, 0.0));
    }
    let size = 2 * cutoff + 1;
    let offset = cutoff as i64;
    let mut matrix = vec![vec![0.0f64; size]; size];
    let mut defect = 0.0f64;
    for (row, slot) in matrix.iter_mut().enumerate() {
        slot[row] = diagonal(row as i64 - offset);
    }
    for hop in 1..size {
        let qn = q.powi(hop as i32);
        let denom = 1.0 - qn * qn;
        // Forward weight n c_n^2 conjugated down by q^n; backward weight
        // n s_n^2 conjugated up by q^{-n}.  Equality is the asserted
        // Hermiticity of the conjugated operator.
        let forward = -gamma * hop as f64 * (1.0 / denom) * qn;
        let backward = -gamma * hop as f64 * (qn * qn / denom) / qn;
        let mismatch = (forward - backward).abs() / forward.abs().max(1.0);
        defect = defect.max(mismatch);
        assert!(
            mismatch <= 1e-12,
            "conjugated lattice matrix lost Hermiticity: {forward} vs {backward}"
        );
        for t in 0..(size - hop) {
            matrix[t + hop][t] = forward;
            matrix[t][t + hop] = backward;
        }
    }
    Ok((jacobi_eigenvalues(matrix), defect))
}

/// Diagonalizes the Hamiltonian on the total-momentum sector through the
/// given mode vector, at the requested lattice cutoff and at cutoff + 8,
/// reporting the refined spectrum and the low-lying drift between the two.
pub fn galerkin_oracle(
    params: &ModelParameters,
    n: &[i64],
    cutoff: usize,
) -> Result<GalerkinReport> {
    if params.n_particles() > 2 {
        return Err(Error::InvalidParameter(
            "lattice oracle is limited to one or two particles".into(),
        ));
    }
    if n.len() != params.n_particles() {
        return Err(Error::InvalidParameter(format!(
            "mode vector has {} entries for {} particles",
            n.len(),
            params.n_particles()
        )));
    }
    if cutoff == 0 || cutoff > 64 {
        return Err(Error::InvalidParameter(format!(
            "lattice cutoff {cutoff} outside 1..=64"
        )));
    }
    let (coarse, defect_coarse) = lattice_spectrum(params, n, cutoff)?;
    let (fine, defect_fine) = lattice_spectrum(params, n, cutoff + 8)?;
    let tracked = coarse.len().min(fine.len()).min(10);
    let drift = (0..tracked)
        .map(|i| (coarse[i] - fine[i]).abs())
        .fold(0.0f64, f64::max);
    if drift > 1e-4 {
        return Err(Error::CutoffInsufficient(format!(
            "lattice eigenvalues drift by {drift:e} between cutoffs {cutoff} and {}",
            cutoff + 8
        )));
    }
    Ok(GalerkinReport {
        eigenvalues: fine,
        hermiticity_defect: defect_coarse.max(defect_fine),
        drift,
        cutoff,
    })
}

/// Partitions of `degree` into at most `parts` parts, each vector padded
/// with zeros to length `parts`, in descending lexicographic order.
fn partitions_of(degree: i64, parts: usize) -> Vec<Vec<i64>> {
    fn extend(remaining: i64, max_part: i64, slots: usize, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if slots == 0 {
            if remaining == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        let top = remaining.min(max_part);
        for part in (0..=top).rev() {
            if part == 0 && remaining > 0 {
                continue;
            }
            prefix.push(part);
            extend(remaining - part, part, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    extend(degree, degree, parts, &mut prefix, &mut out);
    out
}

/// Applies the conjugated trigonometric operator
///
/// ```text
///   sum_j D_j^2 + 2c sum_j D_j
///     + lambda sum_{j<k} (z_j + z_k)/(z_j - z_k) (D_j - D_k) + E0(0)
/// ```
///
/// (D_j = z_j d/dz_j, c = lambda N / 2) to a symmetric polynomial given as
/// a monomial map.  The pair term acts on each transposition-symmetric
/// monomial pair with a_j > a_k as
/// (a_j - a_k)[z^a + z^{a swapped} + 2 sum of intermediate monomials].
fn trig_operator_apply(
    input: &BTreeMap<Vec<i64>, BigRational>,
    n_particles: usize,
    lambda: &BigRational,
) -> BTreeMap<Vec<i64>, BigRational> {
    let half_n = BigRational::from_ratio(n_particles as i64, 2);
    let com = lambda.clone() * half_n;
    let zero_modes = vec![0i64; n_particles];
    let ground = energy_zero_scalar(&zero_modes, lambda);
    let mut out: BTreeMap<Vec<i64>, BigRational> = BTreeMap::new();
    let mut add = |exp: Vec<i64>, value: BigRational| {
        if value.is_zero() {
            return;
        }
        match out.get_mut(&exp) {
            Some(existing) => *existing = existing.clone() + value,
            None => {
                out.insert(exp, value);
            }
        }
    };
    for (exp, coeff) in input {
        let squares: i64 = exp.iter().map(|a| a * a).sum();
        let total: i64 = exp.iter().sum();
        let diagonal = BigRational::from_int(squares)
            + BigRational::from_int(2 * total) * com.clone()
            + ground.clone();
        add(exp.clone(), coeff.clone() * diagonal);
        for j in 0..n_particles {
            for k in (j + 1)..n_particles {
                let delta = exp[j] - exp[k];
                if delta <= 0 {
                    continue;
                }
                let weight = coeff.clone() * lambda.clone() * BigRational::from_int(delta);
                let mut swapped = exp.clone();
                swapped.swap(j, k);
                add(exp.clone(), weight.clone());
                add(swapped, weight.clone());
                let two = BigRational::from_int(2);
                for i in 1..delta {
                    let mut mid = exp.clone();
                    mid[j] -= i;
                    mid[k] += i;
                    add(mid, weight.clone() * two.clone());
                }
            }
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn monomial_orbit(partition: &[i64]) -> Vec<Vec<i64>> {
    // Lexicographic permutation walk over the multiset of parts, from the
    // ascending arrangement upward.
    let mut current = partition.to_vec();
    current.sort_unstable();
    let mut orbit = vec![current.clone()];
    loop {
        let n = current.len();
        let mut i = n.wrapping_sub(1);
        while i > 0 && current[i - 1] >= current[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while current[j] <= current[i - 1] {
            j -= 1;
        }
        current.swap(i - 1, j);
        current[i..].reverse();
        orbit.push(current.clone());
    }
    orbit
}

/// Exact reference coefficients for the q = 0 polynomial part: diagonalizes
/// the conjugated trigonometric operator in the symmetric-monomial basis of
/// the mode vector's degree and solves for the eigenvector at the sector
/// eigenvalue E0(n), normalized so the dominant partition has coefficient 1.
/// Returned as partition -> coefficient.
pub fn jack_oracle(
    n_particles: usize,
    lambda: &Lambda,
    n: &[i64],
) -> Result<BTreeMap<Vec<i64>, BigRational>> {
    if n.len() != n_particles {
        return Err(Error::InvalidParameter(format!(
            "mode vector has {} entries for {} particles",
            n.len(),
            n_particles
        )));
    }
    if !is_highest_weight(n) {
        return Err(Error::InvalidParameter(format!(
            "monomial oracle needs a highest-weight mode vector, got {n:?}"
        )));
    }
    let lam: BigRational = lambda.as_scalar()?;
    let degree: i64 = n.iter().sum();
    let basis = partitions_of(degree, n_particles);
    let dim = basis.len();
    let index: BTreeMap<Vec<i64>, usize> = basis
        .iter()
        .cloned()
        .zip(0..dim)
        .collect();
    // Column s holds the operator image of the monomial symmetric function
    // of basis[s], re-collected over partitions.
    let mut matrix = vec![vec![BigRational::zero(); dim]; dim];
    for (s, source) in basis.iter().enumerate() {
        let mut input = BTreeMap::new();
        for member in monomial_orbit(source) {
            input.insert(member, BigRational::one());
        }
        let image = trig_operator_apply(&input, n_particles, &lam);
        for (exp, value) in image {
            let mut sorted = exp.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let row = *index.get(&sorted).unwrap_or_else(|| {
                panic!("operator image left the degree block at {exp:?}")
            });
            // Collect on the orbit representative only; symmetry of the
            // image makes every orbit member agree.
            if exp == sorted {
                matrix[row][s] = matrix[row][s].clone() + value;
            }
        }
    }
    let target = energy_zero_scalar(n, &lam);
    // Solve (M - E0(n)) v = 0 with v pinned to 1 at the dominant partition.
    let pivot_col = *index.get(n).expect("mode vector indexes its own degree block");
    for (d, row) in matrix.iter_mut().enumerate() {
        row[d] = row[d].clone() - target.clone();
    }
    // Move the pinned column to the right-hand side.
    let mut rhs: Vec<BigRational> = (0..dim)
        .map(|r| -matrix[r][pivot_col].clone())
        .collect();
    let cols: Vec<usize> = (0..dim).filter(|c| *c != pivot_col).collect();
    // Gaussian elimination over the rationals.
    let mut row_of_col: Vec<Option<usize>> = vec![None; cols.len()];
    let mut used = vec![false; dim];
    for (ci, &c) in cols.iter().enumerate() {
        let pivot_row = (0..dim).find(|r| !used[*r] && !matrix[*r][c].is_zero());
        let Some(pr) = pivot_row else {
            continue;
        };
        used[pr] = true;
        row_of_col[ci] = Some(pr);
        let inv = matrix[pr][c].clone();
        for r in 0..dim {
            if r == pr || matrix[r][c].is_zero() {
                continue;
            }
            let factor = matrix[r][c].clone() / inv.clone();
            for &c2 in &cols {
                let delta = factor.clone() * matrix[pr][c2].clone();
                matrix[r][c2] = matrix[r][c2].clone() - delta;
            }
            let delta = factor.clone() * rhs[pr].clone();
            rhs[r] = rhs[r].clone() - delta;
        }
    }
    // Rows never touched by a pivot must be consistent: 0 = rhs.
    for r in 0..dim {
        if !used[r] && !rhs[r].is_zero() {
            return Err(Error::InvalidParameter(format!(
                "monomial oracle found no eigenvector at eigenvalue {}",
                target.render()
            )));
        }
    }
    let mut coefficients = BTreeMap::new();
    coefficients.insert(n.to_vec(), BigRational::one());
    for (ci, &c) in cols.iter().enumerate() {
        let value = match row_of_col[ci] {
            Some(pr) => rhs[pr].clone() / matrix[pr][c].clone(),
            None => {
                return Err(Error::InvalidParameter(format!(
                    "eigenvalue {} is degenerate in its degree block",
                    target.render()
                )))
            }
        };
        if !value.is_zero() {
            coefficients.insert(basis[c].clone(), value);
        }
    }
    Ok(coefficients)
}

/// Extracts the leading q-order coefficients of a symmetric Laurent
/// polynomial as a partition-indexed map (taking each orbit's sorted
/// representative).
pub fn leading_symmetric_coefficients<S: Scalar>(
    poly: &LaurentPoly<S>,
) -> BTreeMap<Vec<i64>, S> {
    let mut out = BTreeMap::new();
    for (exp, series) in poly.terms() {
        let mut sorted = exp.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        if sorted == exp {
            let lead = series.coeff(0).clone();
            if !lead.is_zero() {
                out.insert(sorted, lead);
            }
        }
    }
    out
}
