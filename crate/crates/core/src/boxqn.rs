//! Limited-memory quasi-Newton minimization under lower bounds.
//!
//! Each iteration identifies the variables held at their bound by the
//! projected gradient, builds an L-BFGS direction on the remaining free
//! variables, and runs a projected backtracking line search along it. Only
//! lower bounds are supported; that is all the dual problem needs.

use std::collections::VecDeque;
use std::error::Error as StdError;

use thiserror::Error;

/// Error returned by an objective callback.
pub type ObjectiveError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Error)]
pub enum MinimizeError {
    #[error("objective returned a non-finite value or gradient at evaluation {evaluation}")]
    NonFinite { evaluation: usize },
    #[error("dimension mismatch: bounds cover {bounds} variables, start point has {start}")]
    DimensionMismatch { bounds: usize, start: usize },
    #[error("bound for variable {0} is not finite")]
    InvalidBound(usize),
    #[error("objective failed: {0}")]
    Objective(ObjectiveError),
}

/// Per-variable optional lower bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpec {
    lower: Vec<Option<f64>>,
}

impl BoxSpec {
    pub fn unbounded(n: usize) -> Self {
        BoxSpec { lower: vec![None; n] }
    }

    pub fn with_lower(lower: Vec<Option<f64>>) -> Result<Self, MinimizeError> {
        if let Some(i) = lower.iter().position(|b| matches!(b, Some(v) if !v.is_finite())) {
            return Err(MinimizeError::InvalidBound(i));
        }
        Ok(BoxSpec { lower })
    }

    /// The first `bounded` variables are `>= 0`; the remaining `free` are unbounded.
    pub fn nonnegative_prefix(bounded: usize, free: usize) -> Self {
        let mut lower = vec![Some(0.0); bounded];
        lower.extend(std::iter::repeat_n(None, free));
        BoxSpec { lower }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self, i: usize) -> Option<f64> {
        self.lower[i]
    }

    pub fn project(&self, x: &mut [f64]) {
        for (xi, b) in x.iter_mut().zip(&self.lower) {
            if let Some(l) = b {
                if *xi < *l {
                    *xi = *l;
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .all(|(xi, b)| b.is_none_or(|l| *xi >= l))
    }

    /// Gradient with components zeroed where the bound blocks descent.
    pub fn projected_gradient(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(g)
            .zip(&self.lower)
            .map(|((&xi, &gi), b)| match b {
                Some(l) if xi <= *l && gi > 0.0 => 0.0,
                Some(l) if gi > 0.0 => gi.min(xi - l),
                _ => gi,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Number of stored curvature pairs (`K`). Zero gives projected gradient.
    pub memory: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the infinity norm of the projected gradient.
    pub pg_tol: f64,
    /// Relative objective decrease below which the run is reported as stalled.
    /// Zero disables the test.
    pub rel_f_tol: f64,
    pub armijo: f64,
    pub curvature: f64,
    pub max_line_search: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            memory: 10,
            max_iterations: 5000,
            pg_tol: 1e-5,
            rel_f_tol: 1e-9,
            armijo: 1e-4,
            curvature: 0.9,
            max_line_search: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    IterationCap,
    HookStop,
    LineSearchFailure,
    /// Relative objective decrease fell below `rel_f_tol` before the
    /// projected gradient met `pg_tol`.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
    pub evaluations: usize,
    pub pg_norm: f64,
}

/// State handed to the per-iteration hook. Iteration 0 is the start point.
#[derive(Debug)]
pub struct IterationState<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub f: f64,
    pub grad: &'a [f64],
    pub pg_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookAction {
    Continue,
    Stop,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
}

fn accept_pair(s: &[f64], y: &[f64]) -> bool {
    let sy = dot(s, y);
    sy > 1e-10 * norm2(s) * norm2(y)
}

struct Evaluator<F> {
    objective: F,
    evaluations: usize,
}

impl<F> Evaluator<F>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64, ObjectiveError>,
{
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64, MinimizeError> {
        self.evaluations += 1;
        let f = (self.objective)(x, g).map_err(MinimizeError::Objective)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(MinimizeError::NonFinite {
                evaluation: self.evaluations,
            });
        }
        Ok(f)
    }
}

/// Two-loop recursion restricted to `free` coordinates. Returns `-H g`.
fn lbfgs_direction(g: &[f64], free: &[bool], pairs: &VecDeque<CurvaturePair>, gamma: f64) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(free)
            .map(|(&x, &f)| if f { x } else { 0.0 })
            .collect()
    };
    let mut q = mask(g);
    let mut used = Vec::with_capacity(pairs.len());
    for pair in pairs.iter().rev() {
        let s = mask(&pair.s);
        let y = mask(&pair.y);
        if !accept_pair(&s, &y) {
            continue;
        }
        let rho = 1.0 / dot(&s, &y);
        let alpha = rho * dot(&s, &q);
        for (qi, yi) in q.iter_mut().zip(&y) {
            *qi -= alpha * yi;
        }
        used.push((s, y, rho, alpha));
    }
    let h0 = match used.first() {
        Some((s, y, _, _)) => dot(s, y) / dot(y, y),
        None => gamma,
    };
    for qi in q.iter_mut() {
        *qi *= h0;
    }
    for (s, y, rho, alpha) in used.iter().rev() {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `objective` subject to `bounds`.
///
/// `objective(x, grad)` writes the gradient into `grad` and returns the value.
/// `hook` runs once per accepted iterate, including the projected start point.
pub fn minimize<F, H>(
    objective: F,
    x0: &[f64],
    bounds: &BoxSpec,
    settings: &SolverSettings,
    mut hook: H,
) -> Result<MinimizeResult, MinimizeError>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64, ObjectiveError>,
    H: FnMut(&IterationState<'_>) -> HookAction,
{
    let n = x0.len();
    if bounds.len() != n {
        return Err(MinimizeError::DimensionMismatch {
            bounds: bounds.len(),
            start: n,
        });
    }
    let mut eval = Evaluator {
        objective,
        evaluations: 0,
    };
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = eval.eval(&x, &mut g)?;

    let mut pairs: VecDeque<CurvaturePair> = VecDeque::with_capacity(settings.memory);
    let mut gamma = {
        let gn = norm2(&g);
        if gn > 1.0 { 1.0 / gn } else { 1.0 }
    };
    let mut iteration = 0;

    let finish = |x: Vec<f64>, f: f64, g: Vec<f64>, status: Status, iteration: usize, evaluations: usize| {
        let pg_norm = inf_norm(&bounds.projected_gradient(&x, &g));
        MinimizeResult {
            x,
            f,
            grad: g,
            status,
            iterations: iteration,
            evaluations,
            pg_norm,
        }
    };

    loop {
        let pg = bounds.projected_gradient(&x, &g);
        let pg_norm = inf_norm(&pg);
        let state = IterationState {
            iteration,
            x: &x,
            f,
            grad: &g,
            pg_norm,
        };
        if hook(&state) == HookAction::Stop {
            return Ok(finish(x, f, g, Status::HookStop, iteration, eval.evaluations));
        }
        if pg_norm <= settings.pg_tol {
            return Ok(finish(x, f, g, Status::Converged, iteration, eval.evaluations));
        }
        if iteration >= settings.max_iterations {
            return Ok(finish(x, f, g, Status::IterationCap, iteration, eval.evaluations));
        }

        // Variables pinned at (or within eps of) their bound with an outward gradient.
        let eps_active = pg_norm.min(1e-8);
        let free: Vec<bool> = (0..n)
            .map(|i| match bounds.lower(i) {
                Some(l) => !(x[i] - l <= eps_active && g[i] > 0.0),
                None => true,
            })
            .collect();

        let mut accepted = None;
        for attempt in 0..2 {
            let mut d = lbfgs_direction(&g, &free, &pairs, gamma);
            if dot(&g, &d) >= 0.0 {
                pairs.clear();
                d = lbfgs_direction(&g, &free, &pairs, gamma);
            }
            if let Some(step) = line_search(&mut eval, bounds, settings, &x, f, &g, &d)? {
                accepted = Some(step);
                break;
            }
            if attempt == 0 && !pairs.is_empty() {
                pairs.clear();
                continue;
            }
            break;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            return Ok(finish(x, f, g, Status::LineSearchFailure, iteration, eval.evaluations));
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if accept_pair(&s, &y) {
            gamma = dot(&s, &y) / dot(&y, &y);
            if settings.memory > 0 {
                if pairs.len() == settings.memory {
                    pairs.pop_front();
                }
                pairs.push_back(CurvaturePair { s, y });
            }
        }

        let decrease = f - f_new;
        let stalled = settings.rel_f_tol > 0.0
            && decrease <= settings.rel_f_tol * f.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        iteration += 1;
        if stalled {
            let pg_norm = inf_norm(&bounds.projected_gradient(&x, &g));
            let state = IterationState {
                iteration,
                x: &x,
                f,
                grad: &g,
                pg_norm,
            };
            let status = if hook(&state) == HookAction::Stop {
                Status::HookStop
            } else if pg_norm <= settings.pg_tol {
                Status::Converged
            } else {
                Status::Stalled
            };
            return Ok(finish(x, f, g, status, iteration, eval.evaluations));
        }
    }
}

type Step = (Vec<f64>, f64, Vec<f64>);

/// Projected backtracking with extrapolation while the curvature condition fails.
fn line_search<F>(
    eval: &mut Evaluator<F>,
    bounds: &BoxSpec,
    settings: &SolverSettings,
    x: &[f64],
    f: f64,
    g: &[f64],
    d: &[f64],
) -> Result<Option<Step>, MinimizeError>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64, ObjectiveError>,
{
    let n = x.len();
    let gtd = dot(g, d);
    let mut alpha = 1.0;
    let mut best: Option<Step> = None;
    let mut g_trial = vec![0.0; n];

    for _ in 0..settings.max_line_search.max(1) {
        let mut x_trial: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        bounds.project(&mut x_trial);
        let clipped = x_trial
            .iter()
            .zip(x)
            .zip(d)
            .any(|((xt, xi), di)| (xt - (xi + alpha * di)).abs() > 0.0);
        let step: Vec<f64> = x_trial.iter().zip(x).map(|(a, b)| a - b).collect();
        if step.iter().all(|&s| s == 0.0) {
            return Ok(best);
        }
        let f_trial = eval.eval(&x_trial, &mut g_trial)?;
        let predicted = dot(g, &step);
        let armijo = f_trial <= f + settings.armijo * predicted;
        // Once differences in f drop to round-off, fall back to the
        // derivative form of sufficient decrease.
        let approx_armijo = f_trial <= f + 1e-12 * f.abs()
            && dot(&g_trial, &step) <= (2.0 * settings.armijo - 1.0) * predicted;
        if armijo || approx_armijo {
            let curvature_ok = dot(&g_trial, d) >= settings.curvature * gtd;
            let candidate = (x_trial, f_trial, g_trial.clone());
            if clipped || curvature_ok {
                return Ok(Some(candidate));
            }
            // Sufficient decrease but still steeply descending: try a longer step.
            best = Some(candidate);
            alpha *= 2.0;
            continue;
        }
        if best.is_some() {
            return Ok(best);
        }
        // Safeguarded quadratic interpolation along the (unprojected) ray.
        let denom = 2.0 * (f_trial - f - alpha * gtd);
        let mut next = if denom > 0.0 { -gtd * alpha * alpha / denom } else { 0.5 * alpha };
        if !next.is_finite() {
            next = 0.5 * alpha;
        }
        alpha = next.clamp(0.1 * alpha, 0.5 * alpha);
    }
    Ok(best)
}
