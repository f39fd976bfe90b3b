//! Constrained maximum likelihood for log-mean linear models.
//!
//! Counts are treated as Poisson with mean `ψ = exp(ω)`. The model
//! `Hᵀγ = 0` becomes the non-linear constraint
//!
//! ```text
//! g(ω) = Hᵀ Mᵀ log(Z exp ω) = 0
//! ```
//!
//! with Jacobian `G(ω) = diag(ψ) Zᵀ diag(Zψ)⁻¹ M H`. Each iteration solves the
//! linearized Lagrangian system block-wise with `F = diag(ψ)`:
//!
//! ```text
//! e    = F⁻¹ s,                s = n − ψ
//! P    = Gᵀ F⁻¹ G
//! τ    = −P⁻¹ (Gᵀ e + g)
//! ω   ← ω + step · (e + F⁻¹ G τ)
//! ```
//!
//! The multipliers are recomputed from scratch at every iterate. Steps are
//! halved until the merit `‖g‖² + ‖s + Gτ‖² / N²` strictly decreases.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{LmlError, Result};
use crate::graph::ConstraintMatrix;
use crate::subset::{Direction, Subset, SubsetVector};

/// Observed cell counts `n` and their total `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountVector {
    counts: SubsetVector,
    total: f64,
}

impl CountVector {
    pub fn new(counts: SubsetVector) -> Result<Self> {
        if let Some((d, n)) = counts.iter().find(|&(_, n)| n < 0.0) {
            return Err(LmlError::InvalidCounts(format!(
                "cell {d} has negative count {n}"
            )));
        }
        let total = counts.sum();
        if !(total > 0.0) {
            return Err(LmlError::InvalidCounts(
                "total count must be positive".into(),
            ));
        }
        Ok(CountVector { counts, total })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(SubsetVector::from_values(values)?)
    }

    pub fn counts(&self) -> &SubsetVector {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn p(&self) -> usize {
        self.counts.p()
    }

    pub fn max_count(&self) -> f64 {
        self.counts.values().iter().copied().fold(0.0, f64::max)
    }

    /// Same table scaled by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.counts.map(|n| n * c))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Convergence tolerance on both the constraint and the gradient equation.
    pub tolerance: f64,
    pub max_halvings: usize,
    /// Added to zero cells for the starting point only.
    pub zero_smoothing: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 200,
            tolerance: 1e-10,
            max_halvings: 30,
            zero_smoothing: 1e-8,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_halvings == 0 {
            return Err(LmlError::InvalidOptions(
                "iteration limits must be positive".into(),
            ));
        }
        if !(self.tolerance > 0.0) || !(self.zero_smoothing > 0.0) {
            return Err(LmlError::InvalidOptions(
                "tolerance and smoothing must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub log_likelihood: f64,
    pub constraint_norm: f64,
    /// Step-halving merit `‖g‖² + ‖s + Gτ‖² / N²`.
    pub merit: f64,
    /// Step length taken to reach this iterate; `0` for the starting point.
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// `log ψ̂`
    pub omega: SubsetVector,
    /// Fitted expected counts `ψ̂ = exp ω̂`.
    pub psi: SubsetVector,
    /// `π̂ = ψ̂ / N`
    pub pi: SubsetVector,
    /// Log-mean linear parameter of `π̂`.
    pub gamma: SubsetVector,
    /// Asymptotic covariance of `γ̂`, `2^p x 2^p`, rows and columns by mask.
    pub covariance: DMatrix<f64>,
    /// Lagrange multipliers at `ω̂`.
    pub multipliers: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖g(ω̂)‖∞`
    pub constraint_norm: f64,
    /// `‖s(ω̂) + G(ω̂)τ̂‖∞`
    pub gradient_residual: f64,
    pub trace: Vec<IterationRecord>,
    /// Number of constraints.
    pub df: usize,
    pub sample_size: f64,
}

/// `ℓ(ω; n) = nᵀω − 1ᵀ exp ω`
pub fn log_likelihood(omega: &SubsetVector, n: &CountVector) -> f64 {
    assert_eq!(omega.p(), n.p(), "dimension mismatch");
    omega
        .values()
        .iter()
        .zip(n.counts().values())
        .map(|(w, c)| c * w - w.exp())
        .sum()
}

/// `Z exp ω`, failing when an entry is not a positive finite number.
fn marginal_totals(omega: &SubsetVector) -> Result<(SubsetVector, SubsetVector)> {
    let psi = omega.map(f64::exp);
    let mu = psi.zeta(Direction::OverSupersets);
    let bad = mu.iter().find(|&(_, x)| !(x > 0.0 && x.is_finite()));
    if let Some((d, x)) = bad {
        return Err(LmlError::Inadmissible {
            kind: "mu",
            reason: format!("Z exp(ω) has entry {x} at {d}"),
        });
    }
    Ok((psi, mu))
}

/// `Mᵀ log(Z exp ω)`; its `∅` entry is `log Σψ`.
fn unnormalized_gamma(mu: &SubsetVector) -> SubsetVector {
    mu.map(f64::ln).moebius(Direction::OverSubsets)
}

/// `g(ω) = Hᵀ Mᵀ log(Z exp ω)`.
pub fn constraint_value(omega: &SubsetVector, h: &ConstraintMatrix) -> Result<Vec<f64>> {
    check_dims(omega, h)?;
    let (_, mu) = marginal_totals(omega)?;
    Ok(h.apply_transpose(&unnormalized_gamma(&mu)))
}

/// Column of `diag(ψ) Zᵀ diag(μ)⁻¹ M` applied to `h`.
fn pullback(h: &SubsetVector, psi: &SubsetVector, mu: &SubsetVector) -> Vec<f64> {
    let mut a = h.moebius(Direction::OverSupersets).into_values();
    for (x, m) in a.iter_mut().zip(mu.values()) {
        *x /= m;
    }
    crate::subset::zeta_in_place(&mut a, Direction::OverSubsets);
    for (x, s) in a.iter_mut().zip(psi.values()) {
        *x *= s;
    }
    a
}

fn jacobian_at(h: &ConstraintMatrix, psi: &SubsetVector, mu: &SubsetVector) -> DMatrix<f64> {
    let n = psi.len();
    let mut g = DMatrix::zeros(n, h.k());
    for c in 0..h.k() {
        let col = pullback(&h.column(c), psi, mu);
        g.column_mut(c).copy_from_slice(&col);
    }
    g
}

/// `G(ω) = ∂g/∂ω`, a `2^p x k` matrix.
pub fn constraint_jacobian(omega: &SubsetVector, h: &ConstraintMatrix) -> Result<DMatrix<f64>> {
    check_dims(omega, h)?;
    let (psi, mu) = marginal_totals(omega)?;
    Ok(jacobian_at(h, &psi, &mu))
}

/// Jacobian of `ω ↦ γ`: entry `(j, D)` is `∂γ_D/∂ω_j`.
fn gamma_jacobian(psi: &SubsetVector, mu: &SubsetVector) -> DMatrix<f64> {
    let n = psi.len();
    let p = psi.p();
    let mut j = DMatrix::zeros(n, n);
    for d in 0..n {
        let mut unit = vec![0.0; n];
        unit[d] = 1.0;
        let col = pullback(&SubsetVector::raw(p, unit), psi, mu);
        j.column_mut(d).copy_from_slice(&col);
    }
    j
}

fn check_dims(omega: &SubsetVector, h: &ConstraintMatrix) -> Result<()> {
    if omega.p() != h.p() {
        return Err(LmlError::InvalidConstraints(format!(
            "constraints are for p = {}, data has p = {}",
            h.p(),
            omega.p()
        )));
    }
    Ok(())
}

/// Factorization of the `k x k` matrix `P`.
enum Factor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::linalg::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(p: DMatrix<f64>) -> Option<Factor> {
        if p.nrows() == 0 {
            return Some(Factor::Cholesky(nalgebra::Cholesky::new(p)?));
        }
        match nalgebra::Cholesky::new(p.clone()) {
            Some(c) => Some(Factor::Cholesky(c)),
            None => {
                let lu = p.full_piv_lu();
                lu.is_invertible().then_some(Factor::Lu(lu))
            }
        }
    }

    fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Factor::Cholesky(c) => c.solve(b),
            Factor::Lu(lu) => lu.solve(b).expect("checked invertible"),
        }
    }
}

/// Everything the update needs at one `ω`.
struct Linearization {
    omega: SubsetVector,
    psi: SubsetVector,
    mu: SubsetVector,
    g: DVector<f64>,
    jac: DMatrix<f64>,
    factor: Factor,
    tau: DVector<f64>,
    direction: DVector<f64>,
    residual: DVector<f64>,
    merit: f64,
}

impl Linearization {
    fn at(omega: SubsetVector, n: &CountVector, h: &ConstraintMatrix) -> Option<Linearization> {
        let (psi, mu) = marginal_totals(&omega).ok()?;
        if psi.values().iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return None;
        }
        let big_n = n.total();
        let s = DVector::from_iterator(
            psi.len(),
            n.counts()
                .values()
                .iter()
                .zip(psi.values())
                .map(|(c, x)| c - x),
        );
        let inv_f = DVector::from_iterator(psi.len(), psi.values().iter().map(|x| 1.0 / x));
        let e = s.component_mul(&inv_f);
        let g = DVector::from_vec(h.apply_transpose(&unnormalized_gamma(&mu)));
        let jac = jacobian_at(h, &psi, &mu);

        let scaled = DMatrix::from_fn(jac.nrows(), jac.ncols(), |r, c| {
            jac[(r, c)] * inv_f[r].sqrt()
        });
        let factor = Factor::new(scaled.transpose() * &scaled)?;
        let rhs = jac.transpose() * &e + &g;
        let tau = -factor
            .solve(&DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))
            .column(0)
            .into_owned();
        let g_tau = &jac * &tau;
        let residual = &s + &g_tau;
        let direction = &e + g_tau.component_mul(&inv_f);
        let merit = g.norm_squared() + residual.norm_squared() / (big_n * big_n);
        if !merit.is_finite() || direction.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(Linearization {
            omega,
            psi,
            mu,
            g,
            jac,
            factor,
            tau,
            direction,
            residual,
            merit,
        })
    }

    fn constraint_norm(&self) -> f64 {
        self.g.amax()
    }

    fn gradient_residual(&self) -> f64 {
        self.residual.amax()
    }

    fn converged(&self, tol: f64, count_scale: f64) -> bool {
        self.constraint_norm()
            .max(self.gradient_residual() / count_scale)
            <= tol
    }

    /// `Jᵀ R J` with `R = F⁻¹ − F⁻¹ G P⁻¹ Gᵀ F⁻¹`. The `∅` row and column
    /// are zero because `γ̂_∅ = 0` for the normalized `π̂`.
    fn covariance(&self) -> DMatrix<f64> {
        let n = self.psi.len();
        let j = gamma_jacobian(&self.psi, &self.mu);
        let inv_f: Vec<f64> = self.psi.values().iter().map(|x| 1.0 / x).collect();
        let scaled_j = DMatrix::from_fn(n, n, |r, c| j[(r, c)] * inv_f[r].sqrt());
        let mut cov = scaled_j.transpose() * &scaled_j;
        if self.jac.ncols() > 0 {
            let a = DMatrix::from_fn(n, self.jac.ncols(), |r, c| self.jac[(r, c)] * inv_f[r]);
            let b = a.transpose() * &j;
            let x = self.factor.solve(&b);
            cov -= b.transpose() * x;
        }
        cov.row_mut(0).fill(0.0);
        cov.column_mut(0).fill(0.0);
        cov
    }
}

/// Fits the model `Hᵀγ = 0` starting from the saturated estimate.
///
/// If that run fails and `H` leaves the main effects free, the fit is
/// retried once from the mutual independence estimate, which satisfies
/// every such constraint set. This matters mostly for tables with zero
/// cells, where the smoothed start is far from the model.
pub fn fit(n: &CountVector, h: &ConstraintMatrix, opts: &SolverOptions) -> Result<FitResult> {
    if h.k() == 0 {
        return saturated_fit(n, h, opts);
    }
    let start = n.counts().map(|c| {
        if c > 0.0 {
            c.ln()
        } else {
            opts.zero_smoothing.ln()
        }
    });
    let first = fit_from(n, h, opts, start);
    if matches!(&first, Ok(r) if r.converged) || !h.spares_low_order_rows() {
        return first;
    }
    log::debug!("saturated start failed; retrying from mutual independence");
    match fit_from(n, h, opts, independence_start(n, opts)) {
        Ok(retry) if retry.converged => Ok(retry),
        _ => first,
    }
}

/// `log` of the fitted counts under mutual independence.
fn independence_start(n: &CountVector, opts: &SolverOptions) -> SubsetVector {
    let p = n.p();
    let total = n.total();
    let rates: Vec<f64> = (1..=p)
        .map(|v| {
            let ones: f64 = n
                .counts()
                .iter()
                .filter(|(d, _)| d.contains(v))
                .map(|(_, c)| c)
                .sum();
            ones / total
        })
        .collect();
    let values = (0..1usize << p)
        .map(|d| {
            let cell: f64 = rates
                .iter()
                .enumerate()
                .map(|(i, r)| if d >> i & 1 == 1 { *r } else { 1.0 - r })
                .product();
            (total * cell).max(opts.zero_smoothing).ln()
        })
        .collect();
    SubsetVector::raw(p, values)
}

/// The saturated model's estimate is `ψ̂ = n` (zero cells smoothed).
fn saturated_fit(n: &CountVector, h: &ConstraintMatrix, opts: &SolverOptions) -> Result<FitResult> {
    opts.validate()?;
    check_dims(n.counts(), h)?;
    let psi = n
        .counts()
        .map(|c| if c > 0.0 { c } else { opts.zero_smoothing });
    let omega = psi.map(f64::ln);
    let lin = Linearization::at(omega, n, h).ok_or(LmlError::RankDeficient { iteration: 0 })?;
    let mut result = finish(lin, n, h, true, 1, Vec::new());
    result.psi = psi;
    result.pi = result.psi.map(|x| x / n.total());
    Ok(result)
}

/// Fits from an arbitrary starting point `ω⁰`.
pub fn fit_from(
    n: &CountVector,
    h: &ConstraintMatrix,
    opts: &SolverOptions,
    start: SubsetVector,
) -> Result<FitResult> {
    opts.validate()?;
    check_dims(n.counts(), h)?;
    check_dims(&start, h)?;
    let count_scale = n.max_count().max(1.0);

    let mut state =
        Linearization::at(start, n, h).ok_or(LmlError::RankDeficient { iteration: 0 })?;
    let mut trace = vec![IterationRecord {
        log_likelihood: log_likelihood(&state.omega, n),
        constraint_norm: state.constraint_norm(),
        merit: state.merit,
        step: 0.0,
    }];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if state.converged(opts.tolerance, count_scale) {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..=opts.max_halvings {
            let trial = SubsetVector::raw(
                state.omega.p(),
                state
                    .omega
                    .values()
                    .iter()
                    .zip(state.direction.iter())
                    .map(|(w, d)| w + step * d)
                    .collect(),
            );
            if let Some(cand) = Linearization::at(trial, n, h) {
                if cand.merit < state.merit {
                    next = Some(cand);
                    break;
                }
            }
            step *= 0.5;
        }
        match next {
            Some(cand) => {
                state = cand;
                trace.push(IterationRecord {
                    log_likelihood: log_likelihood(&state.omega, n),
                    constraint_norm: state.constraint_norm(),
                    merit: state.merit,
                    step,
                });
            }
            None => {
                log::debug!("step halving exhausted at iteration {iterations}");
                break;
            }
        }
    }
    if !converged && state.converged(opts.tolerance, count_scale) {
        converged = true;
    }
    Ok(finish(state, n, h, converged, iterations, trace))
}

fn finish(
    state: Linearization,
    n: &CountVector,
    h: &ConstraintMatrix,
    converged: bool,
    iterations: usize,
    mut trace: Vec<IterationRecord>,
) -> FitResult {
    if trace.is_empty() {
        trace.push(IterationRecord {
            log_likelihood: log_likelihood(&state.omega, n),
            constraint_norm: state.constraint_norm(),
            merit: state.merit,
            step: 0.0,
        });
    }
    let covariance = state.covariance();
    let total: f64 = state.psi.sum();
    let normalized = state.mu.map(|m| m / state.mu[Subset::EMPTY]);
    let mut gamma = unnormalized_gamma(&normalized);
    gamma[Subset::EMPTY] = 0.0;
    FitResult {
        pi: state.psi.map(|x| x / total),
        gamma,
        covariance,
        multipliers: state.tau.iter().copied().collect(),
        converged,
        iterations,
        constraint_norm: state.constraint_norm(),
        gradient_residual: state.gradient_residual(),
        trace,
        df: h.k(),
        sample_size: n.total(),
        psi: state.psi,
        omega: state.omega,
    }
}

/// Standard errors of `γ̂` from the asymptotic covariance diagonal.
pub fn asymptotic_se(fit: &FitResult) -> Result<SubsetVector> {
    if !fit.converged {
        return Err(LmlError::NotConverged);
    }
    let p = fit.gamma.p();
    let values = (0..1usize << p)
        .map(|d| {
            let v = fit.covariance[(d, d)];
            if v < -1e-12 * fit.covariance.diagonal().amax().max(1.0) {
                log::warn!(
                    "negative variance {v} for γ at {} clamped to zero",
                    Subset(d)
                );
            }
            v.max(0.0).sqrt()
        })
        .collect();
    Ok(SubsetVector::raw(p, values))
}
