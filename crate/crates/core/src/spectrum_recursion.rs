//! Triangular recursion for the q^2-expansion of the spectrum.
//!
//! An eigenfunction is sought as psi = W * sum_mu alpha(mu) e^{i(n+mu).x},
//! where W carries the two-body factor and the center-of-mass phase, n is a
//! mode vector, and mu runs over the pair lattice: mu = sum_{j<k} mu_jk E_jk
//! with (E_jk)_l = delta_jl - delta_kl.  Expanding alpha(mu) and the energy
//! in the squared nome,
//!
//! ```text
//!   alpha(mu) = sum_{l>=0} alpha_l(mu) q^{2l},
//!   E(q)      = sum_{l>=0} E_l q^{2l},        E_0 = sum_j P_j^2,
//! ```
//!
//! the eigenvalue equation becomes, order by order,
//!
//! ```text
//!   [E0(n+mu) - E0(n)] alpha_l(mu) - sum_{m=1}^{l} E_m alpha_{l-m}(mu)
//!     = gamma sum_{j<k} [ sum_{n>=1} n alpha_l(mu - n e_jk)
//!       + sum_{n,m>=1, nm<=l} n ( alpha_{l-nm}(mu - n e_jk)
//!                               + alpha_{l-nm}(mu + n e_jk) ) ],
//! ```
//!
//! where e_jk is the unit vector of the pair (j,k) on the mu-lattice.  The
//! left factor E0(n+mu) - E0(n) = A + B lambda with exact integers A, B, so
//! resonances (vanishing factor) are decided exactly from the declared
//! rationality of lambda, never by floating comparison.  Visiting sites in a
//! linear extension of the partial order (l' < l, or l' = l and mu' <= mu
//! componentwise) makes the system triangular: each site is solved from
//! strictly smaller ones.  At mu = 0 the diagonal factor vanishes and the
//! equation instead determines E_l; at a resonant site the equation is a
//! consistency constraint on already-computed values, checked and recorded.
//!
//! Support facts used throughout: alpha_l(mu) = 0 whenever some mu_jk < -l
//! (lowering costs one power of q^2 per unit), so lattice sums terminate
//! downward; upward support is cut by the window M >= L, which leaves every
//! E_l with l <= L exact because reaching beyond distance l upward and
//! coming back costs more than q^{2L}.

use std::collections::BTreeMap;

use crate::elliptic_core::{Lambda, ModelParameters, QSeries};
use crate::error::{Error, Result};
use crate::scalar::{json_scalar, Scalar};

/// Mode vector: one integer per particle.
pub type ModeVector = Vec<i64>;

/// Pair-lattice vector: one integer per pair (j,k), j < k, in lexicographic
/// pair order (1,2), (1,3), ..., (2,3), ...
pub type MuVector = Vec<i64>;

/// Highest-weight test: n_1 >= n_2 >= ... >= n_N >= 0.
pub fn is_highest_weight(n: &[i64]) -> bool {
    n.windows(2).all(|w| w[0] >= w[1]) && n.last().is_none_or(|&v| v >= 0)
}

/// Largest minus smallest entry; 0 for a single particle.
pub fn mode_spread(n: &[i64]) -> i64 {
    let max = n.iter().max().copied().unwrap_or(0);
    let min = n.iter().min().copied().unwrap_or(0);
    max - min
}

/// The pairs (j,k), j < k, 0-based, in the canonical order.
pub fn pair_list(n_particles: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n_particles * (n_particles - 1) / 2);
    for j in 0..n_particles {
        for k in (j + 1)..n_particles {
            out.push((j, k));
        }
    }
    out
}

/// Mode shift sum_{j<k} mu_jk E_jk realized by a pair vector.  Not
/// injective for N >= 3: the pair lattice has a kernel, which is exactly
/// where every coupling is resonant.
pub fn mode_shift(n_particles: usize, mu: &[i64]) -> ModeVector {
    let mut m = vec![0i64; n_particles];
    for ((j, k), v) in pair_list(n_particles).into_iter().zip(mu) {
        m[j] += v;
        m[k] -= v;
    }
    m
}

/// Dressed momenta P_j = n_j + (N - j + 1/2) lambda, j = 1..N.
pub fn quasi_momenta(n: &[i64], lambda: f64) -> Vec<f64> {
    let big_n = n.len();
    n.iter()
        .enumerate()
        .map(|(j, nj)| *nj as f64 + (big_n as f64 - (j + 1) as f64 + 0.5) * lambda)
        .collect()
}

/// Free energy E0(n) = sum_j P_j^2.
pub fn energy_zero(n: &[i64], lambda: f64) -> f64 {
    quasi_momenta(n, lambda).iter().map(|p| p * p).sum()
}

/// Unperturbed energy as a coefficient-field scalar, exact for rational
/// couplings: sum_j (n_j + (N - j + 1/2) lambda)^2 with 1-based j.
pub fn energy_zero_scalar<S: Scalar>(n: &[i64], lambda: &S) -> S {
    let big_n = n.len();
    let mut acc = S::zero();
    for (j, nj) in n.iter().enumerate() {
        let dress = S::from_ratio(2 * (big_n - j) as i64 - 1, 2) * lambda.clone();
        let p = S::from_int(*nj) + dress;
        acc = acc + p.clone() * p;
    }
    acc
}

/// Exact integer decomposition E0(n + mu) - E0(n) = A + B*lambda:
///
/// ```text
///   A = 2 sum_{j<k} (n_j - n_k) mu_jk + sum_j m_j^2,
///   B = 2 sum_{j<k} (k - j) mu_jk,
/// ```
///
/// with m the mode shift of mu.  Exactness here is what makes resonance
/// detection sound.
pub fn resonance_factor(n: &[i64], mu: &[i64]) -> (i64, i64) {
    let pairs = pair_list(n.len());
    assert_eq!(mu.len(), pairs.len(), "pair vector length mismatch");
    let shift = mode_shift(n.len(), mu);
    let mut a: i64 = shift.iter().map(|m| m * m).sum();
    let mut b: i64 = 0;
    for ((j, k), v) in pairs.into_iter().zip(mu) {
        a += 2 * (n[j] - n[k]) * v;
        b += 2 * (k - j) as i64 * v;
    }
    (a, b)
}

/// Exact resonance decision for a nonzero pair vector: the diagonal factor
/// A + B lambda vanishes iff A s + B p = 0 for declared lambda = p/s, and
/// iff A = B = 0 for lambda declared irrational.
pub fn is_resonant(n: &[i64], mu: &[i64], lambda: &Lambda) -> bool {
    if mu.iter().all(|&v| v == 0) {
        return false;
    }
    let (a, b) = resonance_factor(n, mu);
    match lambda {
        Lambda::Rational { num, den } => {
            a as i128 * *den as i128 + b as i128 * *num as i128 == 0
        }
        Lambda::Irrational(_) => a == 0 && b == 0,
    }
}

/// (l', mu') strictly precedes (l, mu): lower order, or same order and
/// componentwise <= with at least one strict component.
pub fn precedes(lhs: &(usize, MuVector), rhs: &(usize, MuVector)) -> bool {
    if lhs.0 != rhs.0 {
        return lhs.0 < rhs.0;
    }
    lhs.1 != rhs.1 && lhs.1.iter().zip(&rhs.1).all(|(a, b)| a <= b)
}

/// Options for [`solve_recursion`].
#[derive(Debug, Clone)]
pub struct SolveOptions<S> {
    /// Truncation order L of the q^2-expansion.
    pub order: usize,
    /// Upper mu-window M; `None` means L + spread(n).  Must be >= L.
    pub window: Option<i64>,
    /// Record every coefficient read for [`dependency_audit`].
    pub trace: bool,
    /// The free coefficient alpha_0(0); pure normalization.
    pub normalization: S,
}

impl<S: Scalar> SolveOptions<S> {
    pub fn new(order: usize) -> Self {
        SolveOptions {
            order,
            window: None,
            trace: false,
            normalization: S::one(),
        }
    }

    pub fn with_window(mut self, window: i64) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn with_normalization(mut self, normalization: S) -> Self {
        self.normalization = normalization;
        self
    }
}

/// A resonant site that passed its consistency constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceRecord {
    pub level: usize,
    pub mu: MuVector,
    /// Integer parts of the vanishing diagonal factor A + B lambda.
    pub a: i64,
    pub b: i64,
    /// Rendered value of the constraint defect (zero up to tolerance).
    pub defect: String,
}

/// One recorded coefficient read: `target` was computed using `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEdge {
    pub target: (usize, MuVector),
    pub source: (usize, MuVector),
}

/// Output of [`solve_recursion`].
#[derive(Debug, Clone)]
pub struct SpectralSolution<S> {
    pub params: ModelParameters,
    pub n: ModeVector,
    pub order: usize,
    pub window: i64,
    pub normalization: S,
    /// E(q) = sum_l E_l q^{2l}.
    pub energy: QSeries<S>,
    /// Nonzero alpha_l(mu), keyed by (l, mu).
    pub alpha: BTreeMap<(usize, MuVector), S>,
    pub resonances: Vec<ResonanceRecord>,
    /// Upward reads beyond the window that were treated as zero.
    pub clipped_reads: usize,
    pub trace: Option<Vec<TraceEdge>>,
}

impl<S: Scalar> SpectralSolution<S> {
    /// alpha_l(mu), including the support zeros.
    pub fn alpha_at(&self, level: usize, mu: &[i64]) -> S {
        if mu.iter().any(|&v| v < -(level as i64)) {
            return S::zero();
        }
        self.alpha
            .get(&(level, mu.to_vec()))
            .cloned()
            .unwrap_or_else(S::zero)
    }

    /// Energy evaluated at the parameters' nome.
    pub fn energy_at_nome(&self) -> f64 {
        self.energy.eval(self.params.nome())
    }

    /// Canonical JSON record: deterministic key order, exact coefficients as
    /// fraction strings.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{{\"N\":{},\"lambda\":\"{}\",\"q\":{},\"n\":[{}],\"L\":{},\"M\":{},\"normalization\":{},\"energy\":[{}],\"alpha\":[",
            self.params.n_particles(),
            self.params.lambda().render(),
            self.params.nome(),
            join_i64(&self.n),
            self.order,
            self.window,
            json_scalar(&self.normalization),
            self.energy
                .coeffs()
                .iter()
                .map(json_scalar)
                .collect::<Vec<_>>()
                .join(",")
        ));
        let mut first = true;
        for ((level, mu), value) in &self.alpha {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!(
                "{{\"level\":{},\"mu\":[{}],\"value\":{}}}",
                level,
                join_i64(mu),
                json_scalar(value)
            ));
        }
        out.push_str("],\"resonances\":[");
        let mut first = true;
        for r in &self.resonances {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!(
                "{{\"level\":{},\"mu\":[{}],\"A\":{},\"B\":{},\"defect\":\"{}\"}}",
                r.level,
                join_i64(&r.mu),
                r.a,
                r.b,
                r.defect
            ));
        }
        out.push_str(&format!("],\"clipped_reads\":{}}}", self.clipped_reads));
        out
    }

    /// CSV table of the coefficients: level, one column per pair, value.
    pub fn alpha_csv(&self) -> String {
        let pairs = pair_list(self.params.n_particles());
        let mut out = String::from("level");
        for (j, k) in &pairs {
            out.push_str(&format!(",mu_{}{}", j + 1, k + 1));
        }
        out.push_str(",value\n");
        for ((level, mu), value) in &self.alpha {
            out.push_str(&level.to_string());
            for v in mu {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{}\n", value.render()));
        }
        out
    }
}

fn join_i64(v: &[i64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// All mu vectors with lo <= mu_jk <= hi, ordered by component sum, then
/// lexicographically: a deterministic linear extension of the partial order.
fn enumerate_box(pair_count: usize, lo: i64, hi: i64) -> Vec<MuVector> {
    let mut out = vec![Vec::new()];
    for _ in 0..pair_count {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1) as usize);
        for stem in &out {
            for v in lo..=hi {
                let mut s = stem.clone();
                s.push(v);
                next.push(s);
            }
        }
        out = next;
    }
    out.sort_by_key(|mu| (mu.iter().sum::<i64>(), mu.clone()));
    out
}

/// Runs the triangular recursion for mode vector `n` up to q^{2L}.
///
/// Sites are visited level by level, within a level by ascending component
/// sum (then lexicographic).  Every read lies strictly below the target in
/// the partial order, which [`dependency_audit`] can verify from a trace.
/// The mu = 0 site fixes the normalization at l = 0 and yields E_l at l >= 1
/// (the gauge alpha_l(0) = 0 makes the energy term the only unknown).  At a
/// resonant site the vanished diagonal turns the equation into a constraint;
/// it is checked (exactly in the rational field, to 1e-9 relative in the
/// float field), recorded, and the free coefficient is gauged to zero.
/// Upward reads beyond M count into `clipped_reads`; energies up to order L
/// are unaffected for M >= L, which re-solving with a larger window
/// ([`window_convergence`]) confirms empirically.
pub fn solve_recursion<S: Scalar>(
    params: &ModelParameters,
    n: &[i64],
    options: &SolveOptions<S>,
) -> Result<SpectralSolution<S>> {
    let big_n = params.n_particles();
    if n.len() != big_n {
        return Err(Error::InvalidParameter(format!(
            "mode vector has {} entries for {} particles",
            n.len(),
            big_n
        )));
    }
    let order = options.order;
    let window = options
        .window
        .unwrap_or(order as i64 + mode_spread(n));
    if window < order as i64 {
        return Err(Error::WindowOverflow(format!(
            "window M = {window} cannot hold the lower support of order L = {order}"
        )));
    }
    if options.normalization.is_zero() {
        return Err(Error::InvalidParameter(
            "normalization must be nonzero".into(),
        ));
    }

    let lambda: S = params.lambda().as_scalar()?;
    let gamma: S = params.gamma_scalar()?;
    let pairs = pair_list(big_n);
    let pair_count = pairs.len();

    let mut alpha: BTreeMap<(usize, MuVector), S> = BTreeMap::new();
    let mut energies: Vec<S> = vec![S::zero(); order + 1];
    energies[0] = energy_zero_scalar(n, &lambda);
    let mut resonances = Vec::new();
    let mut clipped_reads = 0usize;
    let mut trace: Option<Vec<TraceEdge>> = options.trace.then(Vec::new);

    for level in 0..=order {
        let sites = enumerate_box(pair_count, -(level as i64), window);
        for mu in sites {
            let target = (level, mu.clone());

            // Accumulates the fully known right-hand side at this site, the
            // float magnitude of its contributions (the scale for the
            // resonance tolerance), and trace edges.
            let mut rhs = S::zero();
            let mut scale = 1.0f64;
            let read = |lvl: usize,
                            m: &MuVector,
                            alpha: &BTreeMap<(usize, MuVector), S>,
                            trace: &mut Option<Vec<TraceEdge>>|
             -> S {
                debug_assert!(m.iter().all(|&v| v >= -(lvl as i64) && v <= window));
                if let Some(edges) = trace {
                    edges.push(TraceEdge {
                        target: target.clone(),
                        source: (lvl, m.clone()),
                    });
                }
                alpha.get(&(lvl, m.clone())).cloned().unwrap_or_else(S::zero)
            };

            // Energy coupling sum_{m>=1} E_m alpha_{l-m}(mu).  At mu = 0 the
            // whole sum vanishes by the gauge; for mu != 0 the m = l term
            // reads alpha_0(mu), which is nonzero only for mu >= 0
            // componentwise, and such sites are visited after (l, 0), so
            // E_l is already known whenever it matters.
            let is_origin = mu.iter().all(|&v| v == 0);
            if !is_origin {
                for m in 1..=level {
                    let lvl = level - m;
                    if mu.iter().any(|&v| v < -(lvl as i64)) {
                        continue;
                    }
                    let a = read(lvl, &mu, &alpha, &mut trace);
                    if a.is_zero() {
                        continue;
                    }
                    let term = energies[m].clone() * a;
                    scale += term.to_f64().abs();
                    rhs = rhs + term;
                }
            }

            // Interaction sums.
            for (p, _) in pairs.iter().enumerate() {
                // Same-level lowering ladder sum_n n alpha_l(mu - n e_p).
                let mut hop = 1i64;
                while mu[p] - hop >= -(level as i64) {
                    let mut m = mu.clone();
                    m[p] -= hop;
                    let a = read(level, &m, &alpha, &mut trace);
                    if !a.is_zero() {
                        let term = gamma.clone() * S::from_int(hop) * a;
                        scale += term.to_f64().abs();
                        rhs = rhs + term;
                    }
                    hop += 1;
                }
                // Cross-level ladders sum_{nm<=l} n [down + up].  Sources
                // below the support floor of their own level are exact
                // zeros and are skipped without a read; upward sources
                // beyond the window are counted as clipped instead.
                for hop in 1..=level as i64 {
                    for step in 1..=(level as i64 / hop) {
                        let lvl = (level as i64 - hop * step) as usize;
                        let mut down = mu.clone();
                        down[p] -= hop;
                        if down.iter().all(|&v| v >= -(lvl as i64)) {
                            let a = read(lvl, &down, &alpha, &mut trace);
                            if !a.is_zero() {
                                let term = gamma.clone() * S::from_int(hop) * a;
                                scale += term.to_f64().abs();
                                rhs = rhs + term;
                            }
                        }
                        if mu[p] + hop > window {
                            clipped_reads += 1;
                            continue;
                        }
                        let mut up = mu.clone();
                        up[p] += hop;
                        if up.iter().all(|&v| v >= -(lvl as i64)) {
                            let a = read(lvl, &up, &alpha, &mut trace);
                            if !a.is_zero() {
                                let term = gamma.clone() * S::from_int(hop) * a;
                                scale += term.to_f64().abs();
                                rhs = rhs + term;
                            }
                        }
                    }
                }
            }

            if is_origin {
                if level == 0 {
                    alpha.insert(target, options.normalization.clone());
                } else {
                    // 0 = E_l * alpha_0(0) + rhs  =>  E_l = -rhs / alpha_0(0).
                    energies[level] = -rhs / options.normalization.clone();
                }
                continue;
            }

            if is_resonant(n, &mu, params.lambda()) {
                let (a, b) = resonance_factor(n, &mu);
                let ok = if S::EXACT {
                    rhs.is_zero()
                } else {
                    rhs.to_f64().abs() <= 1e-9 * scale
                };
                if !ok {
                    return Err(Error::ResonanceObstruction {
                        level,
                        mu,
                        defect: rhs.render(),
                    });
                }
                resonances.push(ResonanceRecord {
                    level,
                    mu,
                    a,
                    b,
                    defect: rhs.render(),
                });
                // Gauge: the undetermined coefficient at a consistent
                // resonant site is zero; nothing to insert.
                continue;
            }

            let (a_int, b_int) = resonance_factor(n, &mu);
            let diagonal = S::from_int(a_int) + S::from_int(b_int) * lambda.clone();
            let value = rhs / diagonal;
            if !value.is_zero() {
                alpha.insert(target, value);
            }
        }
    }

    Ok(SpectralSolution {
        params: params.clone(),
        n: n.to_vec(),
        order,
        window,
        normalization: options.normalization.clone(),
        energy: QSeries::from_coeffs(energies),
        alpha,
        resonances,
        clipped_reads,
        trace,
    })
}

/// Result of [`dependency_audit`].
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub targets: usize,
    pub edges: usize,
    pub max_dependencies: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Closed-form bound on the number of reads a single site (l, mu) can make:
/// l energy-coupling reads, plus per pair the lowering ladder (at most
/// M + min(l, M) steps stay in the box) and both cross-level ladders
/// (2 sum_{m<=l} floor(l/m) index pairs).
pub fn dependency_bound(level: usize, window: i64, pair_count: usize) -> usize {
    let ladder = (window + (level as i64).min(window)) as usize;
    let cross: usize = (1..=level).map(|m| level / m).sum();
    level + pair_count * (ladder + 2 * cross)
}

/// Verifies from a trace that every coefficient was computed using only
/// sites strictly smaller in the partial order, and that no site exceeded
/// the closed-form dependency bound.
pub fn dependency_audit<S: Scalar>(solution: &SpectralSolution<S>) -> Result<AuditReport> {
    let trace = solution.trace.as_ref().ok_or_else(|| {
        Error::InvalidParameter("dependency audit needs a solve with tracing enabled".into())
    })?;
    let pair_count = pair_list(solution.params.n_particles()).len();
    let mut violations = Vec::new();
    let mut counts: BTreeMap<&(usize, MuVector), usize> = BTreeMap::new();
    for edge in trace {
        if !precedes(&edge.source, &edge.target) {
            violations.push(format!(
                "site (l={}, mu={:?}) read (l={}, mu={:?}), which does not precede it",
                edge.target.0, edge.target.1, edge.source.0, edge.source.1
            ));
        }
        *counts.entry(&edge.target).or_insert(0) += 1;
    }
    let mut max_dependencies = 0;
    for (target, count) in &counts {
        let bound = dependency_bound(target.0, solution.window, pair_count);
        if *count > bound {
            violations.push(format!(
                "site (l={}, mu={:?}) made {count} reads, exceeding the bound {bound}",
                target.0, target.1
            ));
        }
        max_dependencies = max_dependencies.max(*count);
    }
    Ok(AuditReport {
        targets: counts.len(),
        edges: trace.len(),
        max_dependencies,
        violations,
    })
}

/// Energy stability under widening the mu-window from M to M + 2.
#[derive(Debug, Clone)]
pub struct WindowConvergence {
    pub window: i64,
    pub refined_window: i64,
    /// max_l |E_l(M) - E_l(M+2)| as floats.
    pub max_energy_shift: f64,
}

/// Re-solves with the window enlarged by two and reports the largest change
/// in any energy coefficient.  For M >= L the shift is exactly zero in the
/// rational field; the check exists to confirm that empirically.
pub fn window_convergence<S: Scalar>(
    params: &ModelParameters,
    n: &[i64],
    options: &SolveOptions<S>,
) -> Result<WindowConvergence> {
    let base = solve_recursion(params, n, options)?;
    let mut refined_options = options.clone();
    refined_options.window = Some(base.window + 2);
    let refined = solve_recursion(params, n, &refined_options)?;
    let max_energy_shift = base
        .energy
        .coeffs()
        .iter()
        .zip(refined.energy.coeffs())
        .map(|(a, b)| (a.clone() - b.clone()).to_f64().abs())
        .fold(0.0, f64::max);
    Ok(WindowConvergence {
        window: base.window,
        refined_window: refined.window,
        max_energy_shift,
    })
}
