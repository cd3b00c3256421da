//! Sparse multivariate Laurent polynomials in plane-wave variables.
//!
//! The eigenfunction data of the solver lives in the algebra
//!
//! ```text
//!   span{ z^m q^{2l} },   z^m = z_1^{m_1} ... z_N^{m_N},   z_j = e^{i x_j},
//! ```
//!
//! with integer (possibly negative) exponent vectors m and q^2-series
//! coefficients truncated at a common order L.  `LaurentPoly` stores the
//! nonzero terms in a map keyed by exponent vector; supports stay small but
//! spread over wide exponent ranges, so a sparse map beats dense arrays.
//!
//! A polynomial may carry an explicit `ExponentWindow`.  The Hamiltonian
//! action implemented by [`apply_laplacian_and_potential`] contains the
//! raising ladder m -> m + n E_jk for every n >= 1 at zeroth q-order, so its
//! exact image has unbounded support; restriction to a window is therefore
//! part of the operator's definition, and the number of dropped boundary
//! writes is reported rather than silently discarded.  On exponents the
//! action reads
//!
//! ```text
//!   (H p)(m) = E0(n0 + m) p(m)
//!            - gamma sum_{j<k} sum_{n>=1} n [ c_n^2 p(m - n E_jk)
//!                                           + s_n^2 p(m + n E_jk) ],
//! ```
//!
//! with E0 the free energy of the dressed momenta P_j = m_j + (N - j + 1/2)
//! lambda and (E_jk)_l = delta_jl - delta_kl.  All arithmetic is immutable
//! value semantics evaluated sequentially, so exact-mode results are
//! bit-reproducible.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::elliptic_core::{potential_fourier_coefficients, ModelParameters, QSeries};
use crate::error::{Error, Result};
use crate::scalar::{json_scalar, Scalar};

/// Inclusive per-variable exponent bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentWindow {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl ExponentWindow {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidParameter(
                "window bound vectors differ in length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter(format!(
                "empty exponent window {lo:?}..{hi:?}"
            )));
        }
        Ok(ExponentWindow { lo, hi })
    }

    /// The same bounds for every variable.
    pub fn uniform(nvars: usize, lo: i64, hi: i64) -> Result<Self> {
        Self::new(vec![lo; nvars], vec![hi; nvars])
    }

    pub fn nvars(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn contains(&self, exp: &[i64]) -> bool {
        exp.len() == self.lo.len()
            && exp
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(e, (l, h))| l <= e && e <= h)
    }

    /// Largest per-variable extent; shifts longer than this cannot stay
    /// inside the window.
    pub fn span(&self) -> i64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .max()
            .unwrap_or(0)
    }
}

/// Sparse Laurent polynomial with q^2-series coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPoly<S> {
    nvars: usize,
    order: usize,
    terms: BTreeMap<Vec<i64>, QSeries<S>>,
    window: Option<ExponentWindow>,
}

impl<S: Scalar> LaurentPoly<S> {
    pub fn zero(nvars: usize, order: usize) -> Self {
        assert!(nvars >= 1, "polynomial needs at least one variable");
        LaurentPoly {
            nvars,
            order,
            terms: BTreeMap::new(),
            window: None,
        }
    }

    pub fn one(nvars: usize, order: usize) -> Self {
        Self::constant(nvars, order, S::one())
    }

    pub fn constant(nvars: usize, order: usize, value: S) -> Self {
        let mut p = Self::zero(nvars, order);
        p.add_term(vec![0; nvars], QSeries::constant(order, value));
        p
    }

    /// The single term `series * z^exp`.
    pub fn monomial(nvars: usize, order: usize, exp: Vec<i64>, series: QSeries<S>) -> Self {
        let mut p = Self::zero(nvars, order);
        p.add_term(exp, series);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in lexicographic exponent order (the serialization order).
    pub fn terms(&self) -> impl Iterator<Item = (&[i64], &QSeries<S>)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    pub fn window(&self) -> Option<&ExponentWindow> {
        self.window.as_ref()
    }

    /// Attach a window; fails if the current support sticks out.
    pub fn with_window(mut self, window: ExponentWindow) -> Result<Self> {
        if window.nvars() != self.nvars {
            return Err(Error::InvalidParameter(
                "window dimension does not match variable count".into(),
            ));
        }
        if let Some(exp) = self.terms.keys().find(|e| !window.contains(e)) {
            return Err(Error::WindowOverflow(format!(
                "term z^{exp:?} lies outside the window"
            )));
        }
        self.window = Some(window);
        Ok(self)
    }

    pub fn without_window(mut self) -> Self {
        self.window = None;
        self
    }

    /// Accumulate `series * z^exp`, keeping the no-stored-zeros invariant.
    /// Panics on dimension or order mismatch and on window violation: those
    /// are programming errors, not data conditions.
    pub fn add_term(&mut self, exp: Vec<i64>, series: QSeries<S>) {
        assert_eq!(exp.len(), self.nvars, "exponent dimension mismatch");
        assert_eq!(series.order(), self.order, "series order mismatch");
        if let Some(w) = &self.window {
            assert!(w.contains(&exp), "term z^{exp:?} outside attached window");
        }
        if series.is_zero() {
            return;
        }
        match self.terms.get_mut(&exp) {
            Some(existing) => {
                let sum = existing.add(&series);
                if sum.is_zero() {
                    self.terms.remove(&exp);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(exp, series);
            }
        }
    }

    /// Coefficient of z^exp; zero series if absent.
    pub fn coeff_at(&self, exp: &[i64]) -> QSeries<S> {
        self.terms
            .get(exp)
            .cloned()
            .unwrap_or_else(|| QSeries::zero(self.order))
    }

    fn compatible(&self, other: &Self) {
        assert_eq!(self.nvars, other.nvars, "variable count mismatch");
        assert_eq!(self.order, other.order, "series order mismatch");
    }

    fn merged_window(&self, other: &Self) -> Option<ExponentWindow> {
        if self.window == other.window {
            self.window.clone()
        } else {
            None
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.compatible(other);
        let mut out = LaurentPoly {
            nvars: self.nvars,
            order: self.order,
            terms: self.terms.clone(),
            window: self.merged_window(other),
        };
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        LaurentPoly {
            nvars: self.nvars,
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c.neg()))
                .collect(),
            window: self.window.clone(),
        }
    }

    pub fn scale(&self, factor: &S) -> Self {
        if factor.is_zero() {
            let mut z = Self::zero(self.nvars, self.order);
            z.window = self.window.clone();
            return z;
        }
        LaurentPoly {
            nvars: self.nvars,
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c.scale(factor)))
                .collect(),
            window: self.window.clone(),
        }
    }

    /// Multiply every coefficient by a q^2-series (may drop terms to zero).
    pub fn scale_series(&self, factor: &QSeries<S>) -> Self {
        let mut out = Self::zero(self.nvars, self.order);
        out.window = self.window.clone();
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.mul(factor));
        }
        out
    }

    /// Product; QSeries coefficients truncate at the common order.  The
    /// result carries no window: term sums may leave any common box.
    pub fn mul(&self, other: &Self) -> Self {
        self.compatible(other);
        let mut out = Self::zero(self.nvars, self.order);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exp: Vec<i64> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exp, ca.mul(cb));
            }
        }
        out
    }

    /// Shift all exponents by `shift` and multiply coefficients by `series`.
    pub fn mul_monomial(&self, shift: &[i64], series: &QSeries<S>) -> Self {
        assert_eq!(shift.len(), self.nvars, "exponent dimension mismatch");
        let mut out = Self::zero(self.nvars, self.order);
        for (e, c) in &self.terms {
            let exp: Vec<i64> = e.iter().zip(shift).map(|(a, b)| a + b).collect();
            out.add_term(exp, c.mul(series));
        }
        out
    }

    /// Average over all N! permutations of the variables.  Exact in rational
    /// mode (division by N! stays in the field).  The result is unwindowed.
    pub fn symmetrize(&self) -> Self {
        let n = self.nvars;
        let mut factorial: i64 = 1;
        for k in 2..=n as i64 {
            factorial *= k;
        }
        let weight = S::from_ratio(1, factorial);
        let mut out = Self::zero(n, self.order);
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, n, &mut |perm| {
            for (e, c) in &self.terms {
                let mut exp = vec![0i64; n];
                for (i, &p) in perm.iter().enumerate() {
                    exp[p] = e[i];
                }
                out.add_term(exp, c.scale(&weight));
            }
        });
        out
    }

    /// Invariance under all variable permutations, tested on the generating
    /// transpositions: exact comparison in exact mode, 1e-12 per coefficient
    /// otherwise.
    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.nvars.saturating_sub(1) {
            for (e, c) in &self.terms {
                let mut swapped = e.clone();
                swapped.swap(i, i + 1);
                let other = self.coeff_at(&swapped);
                let ok = c
                    .coeffs()
                    .iter()
                    .zip(other.coeffs())
                    .all(|(a, b)| a.close_to(b, 1e-12));
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    /// Substitute z_j = e^{i x_j} and sum the coefficient series at nome q.
    pub fn evaluate(&self, x: &[f64], q: f64) -> Complex64 {
        assert_eq!(x.len(), self.nvars, "evaluation point dimension mismatch");
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let phase: f64 = e.iter().zip(x).map(|(m, xi)| *m as f64 * xi).sum();
            acc += Complex64::from_polar(1.0, phase) * c.eval(q);
        }
        acc
    }

    /// Value together with the x-gradient and the diagonal of the x-Hessian:
    /// each term c z^m contributes i m_j (resp. -m_j^2) times itself.
    pub fn evaluate_with_derivatives(&self, x: &[f64], q: f64) -> PointEvaluation {
        assert_eq!(x.len(), self.nvars, "evaluation point dimension mismatch");
        let mut value = Complex64::new(0.0, 0.0);
        let mut gradient = vec![Complex64::new(0.0, 0.0); self.nvars];
        let mut second = vec![Complex64::new(0.0, 0.0); self.nvars];
        for (e, c) in &self.terms {
            let phase: f64 = e.iter().zip(x).map(|(m, xi)| *m as f64 * xi).sum();
            let term = Complex64::from_polar(1.0, phase) * c.eval(q);
            value += term;
            for (j, m) in e.iter().enumerate() {
                let mf = *m as f64;
                gradient[j] += Complex64::new(0.0, mf) * term;
                second[j] -= mf * mf * term;
            }
        }
        PointEvaluation {
            value,
            gradient,
            second_diagonal: second,
        }
    }

    /// Canonical JSON: `{"N":…,"L":…,"terms":[{"exp":[…],"qcoeffs":[…]}…]}`
    /// with terms in lexicographic exponent order.  Exact coefficients render
    /// as quoted `p/q` strings, floats as JSON numbers; equal polynomials
    /// serialize to identical bytes.
    pub fn to_canonical_json(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{{\"N\":{},\"L\":{},\"terms\":[", self.nvars, self.order));
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                out.push(',');
            }
            first = false;
            let exp: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            let coeffs: Vec<String> = c.coeffs().iter().map(json_scalar).collect();
            out.push_str(&format!(
                "{{\"exp\":[{}],\"qcoeffs\":[{}]}}",
                exp.join(","),
                coeffs.join(",")
            ));
        }
        out.push_str("]}");
        out
    }
}

/// Heap's algorithm; calls `visit` on every permutation of `items`.
fn permute<F: FnMut(&[usize])>(items: &mut Vec<usize>, k: usize, visit: &mut F) {
    if k <= 1 {
        visit(items);
        return;
    }
    for i in 0..k {
        permute(items, k - 1, visit);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// Value, gradient, and diagonal second derivatives at one point, with
/// derivatives taken in the angles x_j.
#[derive(Debug, Clone)]
pub struct PointEvaluation {
    pub value: Complex64,
    pub gradient: Vec<Complex64>,
    pub second_diagonal: Vec<Complex64>,
}

/// Image of a polynomial under the window-restricted Hamiltonian action,
/// plus the number of nonzero writes the window boundary cut off.
#[derive(Debug, Clone)]
pub struct OperatorImage<S> {
    pub poly: LaurentPoly<S>,
    pub clipped: usize,
}

/// Acts with the transformed Hamiltonian on the plane-wave part of the
/// wavefunction, entirely in coefficient space.  Exponents are relative to
/// `offset`: the stored exponent m stands for the mode vector offset + m.
///
/// The diagonal term multiplies each coefficient by the free energy
/// E0(offset + m) = sum_j (offset_j + m_j + (N - j + 1/2) lambda)^2; the
/// interaction writes -gamma n c_n^2 (resp. -gamma n s_n^2) times the source
/// coefficient to m + n E_jk (resp. m - n E_jk).
///
/// For N >= 2 the polynomial must carry a window: the raising ladder has
/// unbounded reach, so the operator is only defined as its restriction to
/// the window lattice.  Writes that land outside are dropped and counted in
/// `clipped` when the shift fits the window span; longer shifts can never
/// land inside and are structurally absent.  `clipped > 0 `is the norm, not
/// an error: exactness of downstream consumers rests on the q-grading of the
/// dropped terms, not on the count being zero.
pub fn apply_laplacian_and_potential<S: Scalar>(
    p: &LaurentPoly<S>,
    params: &ModelParameters,
    offset: &[i64],
) -> Result<OperatorImage<S>> {
    let n = p.nvars();
    if offset.len() != n {
        return Err(Error::InvalidParameter(
            "offset dimension does not match variable count".into(),
        ));
    }
    if params.n_particles() != n {
        return Err(Error::InvalidParameter(format!(
            "parameters are for {} particles but the polynomial has {} variables",
            params.n_particles(),
            n
        )));
    }
    let order = p.order();
    let lambda: S = params.lambda().as_scalar()?;
    // Dressing shifts (N - j + 1/2) lambda for j = 1..N.
    let shifts: Vec<S> = (0..n)
        .map(|j| S::from_ratio(2 * (n - j) as i64 - 1, 2) * lambda.clone())
        .collect();
    let free_energy = |m: &[i64]| -> S {
        let mut acc = S::zero();
        for (j, mj) in m.iter().enumerate() {
            let pj = S::from_int(offset[j] + mj) + shifts[j].clone();
            acc = acc + pj.clone() * pj;
        }
        acc
    };

    let mut image = LaurentPoly::zero(n, order);
    let mut clipped = 0usize;

    if n >= 2 {
        let window = p.window().cloned().ok_or_else(|| {
            Error::WindowOverflow(
                "interaction image has unbounded support; attach an exponent window first".into(),
            )
        })?;
        if let Some((exp, _)) = p.terms().find(|(e, _)| !window.contains(e)) {
            return Err(Error::WindowOverflow(format!(
                "input term z^{exp:?} lies outside its window"
            )));
        }
        let span = window.span().max(order as i64) as usize;
        let weights = potential_fourier_coefficients::<S>(order, span);
        let minus_gamma: S = -params.gamma_scalar::<S>()?;
        for (m, coeff) in p.terms() {
            for j in 0..n {
                for k in (j + 1)..n {
                    for (step, (fwd, bwd)) in weights.iter().enumerate() {
                        let hop = (step + 1) as i64;
                        // Raising writes, weight -gamma n c_n^2.
                        let mut up = m.to_vec();
                        up[j] += hop;
                        up[k] -= hop;
                        if window.contains(&up) {
                            image.add_term(up, coeff.mul(fwd).scale(&minus_gamma));
                        } else {
                            clipped += 1;
                        }
                        // Lowering writes, weight -gamma n s_n^2; these carry
                        // at least q^{2n} and vanish identically past the
                        // truncation order.
                        if bwd.is_zero() {
                            continue;
                        }
                        let mut down = m.to_vec();
                        down[j] -= hop;
                        down[k] += hop;
                        if window.contains(&down) {
                            image.add_term(down, coeff.mul(bwd).scale(&minus_gamma));
                        } else {
                            clipped += 1;
                        }
                    }
                }
            }
        }
        for (m, coeff) in p.terms() {
            image.add_term(m.to_vec(), coeff.scale(&free_energy(m)));
        }
        image.window = Some(window);
    } else {
        for (m, coeff) in p.terms() {
            image.add_term(m.to_vec(), coeff.scale(&free_energy(m)));
        }
        image.window = p.window().cloned();
    }

    Ok(OperatorImage {
        poly: image,
        clipped,
    })
}
