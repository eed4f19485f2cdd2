//! Semidefinite feasibility for a fixed trace-ratio level `delta`.
//!
//! For a level `delta` the question is whether some `Z` satisfies
//!
//! ```text
//! trace(S_ij Z) >= delta * trace(S_k Z)   for all pairs i<j and classes k
//! trace(Z) = r,   0 <= Z <= I
//! ```
//!
//! The constraint `Z <= I` is carried by a slack block `Q = I - Z`, so the
//! primal variable is `X = blockdiag(Z, Q) >= 0`. Minimizing `0.5 ||X||_F^2`
//! over that set has a smooth dual in the multipliers `(u, v, p)`:
//!
//! ```text
//! min  0.5 ||(Abar)_+||_F^2 - v r - sum_s p_ss     s.t. u >= 0
//! Abar = blockdiag(A1, P),  A1 = sum u_ijk D_ijk + v I + P,  D_ijk = S_ij - delta S_k
//! ```
//!
//! `Abar` is never formed at `2d x 2d`; the two `d x d` blocks are
//! decomposed separately. A dual point with `(Abar)_+ ~ 0` and
//! `v r + sum p_ss > 0` certifies infeasibility. Otherwise the minimizer's
//! `(A1)_+` is the primal `Z`, which is checked against the constraints
//! before it is reported as feasible.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::rc::Rc;

use thiserror::Error;

use crate::boxqn::{self, BoxSpec, HookAction, MinimizeError, SolverSettings, Status};
use crate::scatter::ScatterSet;
use crate::symmat::{split_from_eig, sym_eig, trace_inner, zero_eigenvalue_tolerance, LinalgError, SymMatrix};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dual minimization failed: {0}")]
    Minimize(#[from] MinimizeError),
    #[error("invalid feasibility problem: {0}")]
    InvalidProblem(String),
    #[error("dual point has wrong shape: expected {expected} variables, got {got}")]
    PointShape { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOptions {
    /// Certificate threshold on `||(Abar)_+||_F / (v r + sum p_ss)`.
    pub epsilon: f64,
    /// Relative tolerance of the primal verification.
    pub primal_tol: f64,
    /// Defaults are tighter than [`SolverSettings::default`]: near the optimal
    /// level the dual is flat and a loose stop leaves `(A1)_+` unverifiable.
    pub settings: SolverSettings,
    /// Stop the dual run as soon as the current `(A1)_+` passes verification.
    pub stop_on_verified_primal: bool,
    /// Print one line per dual iteration to stderr.
    pub verbose: bool,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions {
            epsilon: 1e-3,
            primal_tol: 1e-4,
            settings: SolverSettings {
                pg_tol: 1e-8,
                rel_f_tol: 1e-12,
                ..SolverSettings::default()
            },
            stop_on_verified_primal: true,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    d: usize,
    r: usize,
    delta: f64,
    /// `D_ijk = S_ij - delta S_k`, ordered by `(i, j)` outer and `k` inner.
    diffs: Vec<SymMatrix>,
    within: Vec<SymMatrix>,
    triples: Vec<(usize, usize, usize)>,
    pub options: FeasibilityOptions,
}

impl FeasibilityProblem {
    pub fn new(scatters: &ScatterSet, r: usize, delta: f64, options: FeasibilityOptions) -> Result<Self, SolveError> {
        let mut diffs = Vec::with_capacity(scatters.between.len() * scatters.within.len());
        let mut triples = Vec::with_capacity(diffs.capacity());
        for (sij, &(i, j)) in scatters.between.iter().zip(&scatters.pairs) {
            for (k, sk) in scatters.within.iter().enumerate() {
                let mut dk = sij.clone();
                dk.axpy(-delta, sk)?;
                diffs.push(dk);
                triples.push((i, j, k));
            }
        }
        let mut problem = Self::from_parts(scatters.dim(), r, delta, diffs, scatters.within.clone(), options)?;
        problem.triples = triples;
        Ok(problem)
    }

    /// Builds a problem from explicit constraint matrices `D` and the within
    /// scatters used to scale the slack check.
    pub fn from_parts(
        d: usize,
        r: usize,
        delta: f64,
        diffs: Vec<SymMatrix>,
        within: Vec<SymMatrix>,
        options: FeasibilityOptions,
    ) -> Result<Self, SolveError> {
        if d == 0 || r == 0 || r > d {
            return Err(SolveError::InvalidProblem(format!("need 1 <= r <= d, got r={r}, d={d}")));
        }
        if diffs.is_empty() {
            return Err(SolveError::InvalidProblem("no inequality constraints".into()));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(SolveError::InvalidProblem(format!("delta must be finite and >= 0, got {delta}")));
        }
        if let Some(m) = diffs.iter().chain(&within).find(|m| m.dim() != d) {
            return Err(SolveError::Linalg(LinalgError::DimensionMismatch {
                expected: d,
                got: m.dim(),
            }));
        }
        if !(options.epsilon > 0.0 && options.primal_tol > 0.0) {
            return Err(SolveError::InvalidProblem("epsilon and primal_tol must be positive".into()));
        }
        let triples = (0..diffs.len()).map(|i| (0, 0, i)).collect();
        Ok(FeasibilityProblem {
            d,
            r,
            delta,
            diffs,
            within,
            triples,
            options,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn diffs(&self) -> &[SymMatrix] {
        &self.diffs
    }

    pub fn within(&self) -> &[SymMatrix] {
        &self.within
    }

    /// `(i, j, k)` label of each entry of `u`.
    pub fn triples(&self) -> &[(usize, usize, usize)] {
        &self.triples
    }

    pub fn num_u(&self) -> usize {
        self.diffs.len()
    }

    pub fn num_p(&self) -> usize {
        self.d * (self.d + 1) / 2
    }

    /// Length of the flattened dual vector `[u, v, p]`.
    pub fn num_vars(&self) -> usize {
        self.num_u() + 1 + self.num_p()
    }

    /// Position of `p_st` (`s >= t`) within `p`: column-major lower triangle.
    pub fn p_index(&self, s: usize, t: usize) -> usize {
        let (s, t) = if s >= t { (s, t) } else { (t, s) };
        t * self.d - t * t.saturating_sub(1) / 2 + (s - t)
    }
}

/// Dual multipliers. `u >= 0`; `v` and `p` are free.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub u: Vec<f64>,
    pub v: f64,
    pub p: Vec<f64>,
}

impl DualPoint {
    pub fn zero(problem: &FeasibilityProblem) -> Self {
        DualPoint {
            u: vec![0.0; problem.num_u()],
            v: 0.0,
            p: vec![0.0; problem.num_p()],
        }
    }

    pub fn from_flat(problem: &FeasibilityProblem, x: &[f64]) -> Result<Self, SolveError> {
        if x.len() != problem.num_vars() {
            return Err(SolveError::PointShape {
                expected: problem.num_vars(),
                got: x.len(),
            });
        }
        let nu = problem.num_u();
        Ok(DualPoint {
            u: x[..nu].to_vec(),
            v: x[nu],
            p: x[nu + 1..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.len() + 1 + self.p.len());
        x.extend_from_slice(&self.u);
        x.push(self.v);
        x.extend_from_slice(&self.p);
        x
    }

    fn check_shape(&self, problem: &FeasibilityProblem) -> Result<(), SolveError> {
        if self.u.len() != problem.num_u() || self.p.len() != problem.num_p() {
            return Err(SolveError::PointShape {
                expected: problem.num_vars(),
                got: self.u.len() + 1 + self.p.len(),
            });
        }
        Ok(())
    }

    /// `v r + sum_s p_ss`.
    pub fn certificate_denominator(&self, problem: &FeasibilityProblem) -> f64 {
        let diag: f64 = (0..problem.dim()).map(|s| self.p[problem.p_index(s, s)]).sum();
        self.v * problem.rank() as f64 + diag
    }
}

/// The two diagonal blocks of `Abar`: `A1` (top-left) and `P` (bottom-right).
#[derive(Debug, Clone, PartialEq)]
pub struct AbarBlocks {
    pub a1: SymMatrix,
    pub p: SymMatrix,
}

impl AbarBlocks {
    pub fn frobenius_norm(&self) -> f64 {
        (self.a1.frobenius_norm().powi(2) + self.p.frobenius_norm().powi(2)).sqrt()
    }
}

pub fn assemble_abar(problem: &FeasibilityProblem, point: &DualPoint) -> Result<AbarBlocks, SolveError> {
    point.check_shape(problem)?;
    let d = problem.dim();
    let p = SymMatrix::from_fn(d, |s, t| point.p[problem.p_index(s, t)]);
    let mut a1 = p.clone();
    a1.add_to_diagonal(point.v);
    for (uk, dk) in point.u.iter().zip(&problem.diffs) {
        if *uk != 0.0 {
            a1.axpy(*uk, dk)?;
        }
    }
    Ok(AbarBlocks { a1, p })
}

/// Value, gradient and positive parts of the dual objective at one point.
#[derive(Debug, Clone)]
pub struct DualEvaluation {
    pub value: f64,
    /// Flattened as `[u, v, p]`.
    pub grad: Vec<f64>,
    /// `(A1)_+` and `(P)_+`.
    pub plus: AbarBlocks,
    /// Eigenvalues of `A1`, ascending.
    pub a1_eigenvalues: Vec<f64>,
    /// `v r + sum p_ss`.
    pub denominator: f64,
}

impl DualEvaluation {
    pub fn plus_norm(&self) -> f64 {
        self.plus.frobenius_norm()
    }
}

pub fn dual_value_and_grad(problem: &FeasibilityProblem, point: &DualPoint) -> Result<DualEvaluation, SolveError> {
    let blocks = assemble_abar(problem, point)?;
    let eig_a1 = sym_eig(&blocks.a1)?;
    let eig_p = sym_eig(&blocks.p)?;
    let a1_plus = eig_a1.reconstruct_with(|l| l.max(0.0));
    let p_plus = eig_p.reconstruct_with(|l| l.max(0.0));
    let sq = |ls: &[f64]| ls.iter().map(|l| l.max(0.0).powi(2)).sum::<f64>();
    let denominator = point.certificate_denominator(problem);
    let value = 0.5 * (sq(&eig_a1.eigenvalues) + sq(&eig_p.eigenvalues)) - denominator;

    let d = problem.dim();
    let nu = problem.num_u();
    let mut grad = vec![0.0; problem.num_vars()];
    for (g, dk) in grad.iter_mut().zip(&problem.diffs) {
        *g = trace_inner(&a1_plus, dk)?;
    }
    grad[nu] = a1_plus.trace() - problem.rank() as f64;
    for t in 0..d {
        for s in t..d {
            let both = a1_plus.get(s, t) + p_plus.get(s, t);
            let idx = nu + 1 + problem.p_index(s, t);
            grad[idx] = if s == t { both - 1.0 } else { 2.0 * both };
        }
    }
    Ok(DualEvaluation {
        value,
        grad,
        plus: AbarBlocks {
            a1: a1_plus,
            p: p_plus,
        },
        a1_eigenvalues: eig_a1.eigenvalues,
        denominator,
    })
}

/// Positive and negative parts of both blocks (diagnostic).
pub fn abar_parts(problem: &FeasibilityProblem, point: &DualPoint) -> Result<(AbarBlocks, AbarBlocks), SolveError> {
    let blocks = assemble_abar(problem, point)?;
    let ea = sym_eig(&blocks.a1)?;
    let ep = sym_eig(&blocks.p)?;
    let (a1p, a1m) = split_from_eig(&ea, zero_eigenvalue_tolerance(&blocks.a1));
    let (pp, pm) = split_from_eig(&ep, zero_eigenvalue_tolerance(&blocks.p));
    Ok((AbarBlocks { a1: a1p, p: pp }, AbarBlocks { a1: a1m, p: pm }))
}

/// Infeasibility test: `||(Abar)_+||_F / |v r + sum p_ss| < epsilon` and
/// `v r + sum p_ss > 0`.
pub fn infeasibility_certificate(problem: &FeasibilityProblem, point: &DualPoint, abar_plus: &AbarBlocks) -> bool {
    certificate_fires(problem, abar_plus.frobenius_norm(), point.certificate_denominator(problem))
}

fn certificate_fires(problem: &FeasibilityProblem, plus_norm: f64, denominator: f64) -> bool {
    denominator > 0.0 && plus_norm / denominator.abs() < problem.options.epsilon
}

/// Outcome of checking a candidate `Z` (and slack `Q`) against the primal constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalCheck {
    /// `|trace(Z) - r|`.
    pub trace_residual: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    /// `min_ijk trace(D_ijk Z)`.
    pub worst_slack: f64,
    /// `max(1, delta * max_k trace(S_k Z))`.
    pub slack_scale: f64,
    /// `||Z + Q - I||_F`.
    pub identity_residual: f64,
    pub passed: bool,
}

impl PrimalCheck {
    /// Largest violation, each measured relative to its allowed tolerance unit.
    pub fn max_violation(&self, r: usize, d: usize) -> f64 {
        let v = [
            self.trace_residual / r as f64,
            (-self.eig_min).max(0.0),
            (self.eig_max - 1.0).max(0.0),
            (-self.worst_slack / self.slack_scale).max(0.0),
            self.identity_residual / (d as f64).sqrt(),
        ];
        v.into_iter().fold(0.0, f64::max)
    }
}

fn assess(
    problem: &FeasibilityProblem,
    trace_residual: f64,
    eigs: &[f64],
    worst_slack: f64,
    max_within: f64,
    identity_residual: f64,
) -> PrimalCheck {
    let eta = problem.options.primal_tol;
    let eig_min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let eig_max = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack_scale = (problem.delta * max_within).max(1.0);
    let r = problem.r as f64;
    let passed = trace_residual <= eta * r
        && eig_min >= -eta
        && eig_max <= 1.0 + eta
        && worst_slack >= -eta * slack_scale
        && identity_residual <= eta * (problem.d as f64).sqrt();
    PrimalCheck {
        trace_residual,
        eig_min,
        eig_max,
        worst_slack,
        slack_scale,
        identity_residual,
        passed,
    }
}

/// Checks `Z` against every primal constraint with the problem's tolerance.
pub fn verify_primal(problem: &FeasibilityProblem, z: &SymMatrix, q: &SymMatrix) -> Result<PrimalCheck, SolveError> {
    let eig = sym_eig(z)?;
    let mut worst = f64::INFINITY;
    for dk in &problem.diffs {
        worst = worst.min(trace_inner(dk, z)?);
    }
    let mut max_within: f64 = 0.0;
    for sk in &problem.within {
        max_within = max_within.max(trace_inner(sk, z)?);
    }
    let mut resid = z.add(q)?;
    resid.add_to_diagonal(-1.0);
    Ok(assess(
        problem,
        (z.trace() - problem.r as f64).abs(),
        &eig.eigenvalues,
        worst,
        max_within,
        resid.frobenius_norm(),
    ))
}

/// Same check, reusing quantities already present in a dual evaluation.
fn verify_from_evaluation(problem: &FeasibilityProblem, ev: &DualEvaluation) -> PrimalCheck {
    let nu = problem.num_u();
    let worst = ev.grad[..nu].iter().copied().fold(f64::INFINITY, f64::min);
    let max_within = problem
        .within
        .iter()
        .map(|sk| trace_inner(sk, &ev.plus.a1).expect("dims agree"))
        .fold(0.0, f64::max);
    let d = problem.d;
    let mut resid_sq = 0.0;
    for t in 0..d {
        for s in t..d {
            let g = ev.grad[nu + 1 + problem.p_index(s, t)];
            resid_sq += if s == t { g * g } else { 0.5 * g * g };
        }
    }
    let z_eigs: Vec<f64> = ev.a1_eigenvalues.iter().map(|l| l.max(0.0)).collect();
    assess(problem, ev.grad[nu].abs(), &z_eigs, worst, max_within, resid_sq.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityStatus {
    Feasible(SymMatrix),
    Infeasible(DualPoint),
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub solver_status: Status,
    pub dual_objective: f64,
    pub pg_norm: f64,
    /// `||(Abar)_+||_F` at the final point.
    pub plus_norm: f64,
    /// `v r + sum p_ss` at the final point.
    pub denominator: f64,
    pub primal: PrimalCheck,
    pub max_primal_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOutcome {
    pub status: FeasibilityStatus,
    pub diagnostics: Diagnostics,
    /// Last dual iterate; usable as a warm start.
    pub final_point: DualPoint,
    /// `Q = (P)_+` at the final point.
    pub slack: SymMatrix,
}

impl FeasibilityOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Feasible(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Infeasible(_))
    }

    pub fn feasible_z(&self) -> Option<&SymMatrix> {
        match &self.status {
            FeasibilityStatus::Feasible(z) => Some(z),
            _ => None,
        }
    }
}

const CACHE_LEN: usize = 4;

struct EvalCache {
    entries: VecDeque<(Vec<f64>, Rc<DualEvaluation>)>,
}

impl EvalCache {
    fn get(&self, x: &[f64]) -> Option<Rc<DualEvaluation>> {
        self.entries.iter().rev().find(|(k, _)| k == x).map(|(_, e)| Rc::clone(e))
    }

    fn put(&mut self, x: &[f64], ev: Rc<DualEvaluation>) {
        if self.entries.len() == CACHE_LEN {
            self.entries.pop_front();
        }
        self.entries.push_back((x.to_vec(), ev));
    }
}

fn evaluate_cached(
    problem: &FeasibilityProblem,
    cache: &RefCell<EvalCache>,
    x: &[f64],
) -> Result<Rc<DualEvaluation>, SolveError> {
    if let Some(ev) = cache.borrow().get(x) {
        return Ok(ev);
    }
    let ev = Rc::new(dual_value_and_grad(problem, &DualPoint::from_flat(problem, x)?)?);
    cache.borrow_mut().put(x, Rc::clone(&ev));
    Ok(ev)
}

enum Verdict {
    Feasible,
    Infeasible,
}

/// Runs the dual minimization with the per-iteration certificate and primal checks.
pub fn solve_feasibility(
    problem: &FeasibilityProblem,
    warm_start: Option<&DualPoint>,
) -> Result<FeasibilityOutcome, SolveError> {
    let x0 = match warm_start {
        Some(p) => {
            p.check_shape(problem)?;
            p.to_flat()
        }
        None => vec![0.0; problem.num_vars()],
    };
    let bounds = BoxSpec::nonnegative_prefix(problem.num_u(), 1 + problem.num_p());
    let cache = RefCell::new(EvalCache {
        entries: VecDeque::with_capacity(CACHE_LEN),
    });
    let mut hook_error: Option<SolveError> = None;
    let mut verdict: Option<Verdict> = None;
    let opts = &problem.options;

    let objective = |x: &[f64], g: &mut [f64]| -> Result<f64, boxqn::ObjectiveError> {
        let ev = evaluate_cached(problem, &cache, x)?;
        g.copy_from_slice(&ev.grad);
        Ok(ev.value)
    };
    let hook = |state: &boxqn::IterationState<'_>| -> HookAction {
        let ev = match evaluate_cached(problem, &cache, state.x) {
            Ok(ev) => ev,
            Err(e) => {
                hook_error = Some(e);
                return HookAction::Stop;
            }
        };
        let plus_norm = ev.plus_norm();
        if opts.verbose {
            eprintln!(
                "dual iter {:5}  f {:+.10e}  pg {:.3e}  |A+| {:.3e}  vr+sum(p_ss) {:+.6e}",
                state.iteration, state.f, state.pg_norm, plus_norm, ev.denominator
            );
        }
        if certificate_fires(problem, plus_norm, ev.denominator) {
            verdict = Some(Verdict::Infeasible);
            return HookAction::Stop;
        }
        if opts.stop_on_verified_primal && verify_from_evaluation(problem, &ev).passed {
            verdict = Some(Verdict::Feasible);
            return HookAction::Stop;
        }
        HookAction::Continue
    };

    let result = boxqn::minimize(objective, &x0, &bounds, &opts.settings, hook)?;
    if let Some(e) = hook_error {
        return Err(e);
    }
    let ev = evaluate_cached(problem, &cache, &result.x)?;
    let point = DualPoint::from_flat(problem, &result.x)?;
    let primal = verify_from_evaluation(problem, &ev);
    let plus_norm = ev.plus_norm();

    let status = match verdict {
        Some(Verdict::Infeasible) => FeasibilityStatus::Infeasible(point.clone()),
        Some(Verdict::Feasible) => FeasibilityStatus::Feasible(ev.plus.a1.clone()),
        None if certificate_fires(problem, plus_norm, ev.denominator) => FeasibilityStatus::Infeasible(point.clone()),
        None if primal.passed => FeasibilityStatus::Feasible(ev.plus.a1.clone()),
        None => FeasibilityStatus::Indeterminate,
    };
    let diagnostics = Diagnostics {
        iterations: result.iterations,
        evaluations: result.evaluations,
        solver_status: result.status,
        dual_objective: result.f,
        pg_norm: result.pg_norm,
        plus_norm,
        denominator: ev.denominator,
        max_primal_violation: primal.max_violation(problem.r, problem.d),
        primal,
    };
    Ok(FeasibilityOutcome {
        status,
        diagnostics,
        final_point: point,
        slack: ev.plus.p.clone(),
    })
}
