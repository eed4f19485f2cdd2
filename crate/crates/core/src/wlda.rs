//! Bisection over the trace-ratio level and the fitted projection model.
//!
//! Every accepted lower bound `delta_l` is backed by a `Z` that passed primal
//! verification, so the reported `delta_star` is always achievable by the
//! stored `Z` (up to the verification tolerance). Upper bounds come from
//! infeasibility certificates, from inconclusive solves, or from `delta_cap`.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::boxqn::Status;
use crate::evalkit::PcaBasis;
use crate::scatter::{compute_scatters, worst_case_objective, DataError, Dataset, ScatterSet, WorstCase};
use crate::sdpfeas::{
    solve_feasibility, verify_primal, DualPoint, FeasibilityOptions, FeasibilityOutcome, FeasibilityProblem,
    FeasibilityStatus, SolveError,
};
use crate::symmat::{orthonormality_defect, top_r_eigvecs, LinalgError, Matrix, SymMatrix};

pub const MODEL_HEADER: &str = "sdwlda-model v1";

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate: rho_b is identically zero (all class means coincide)")]
    Degenerate,
    #[error("could not certify the initial lower bound {delta}: max primal violation {violation:.3e}")]
    Uncertified { delta: f64, violation: f64 },
    #[error("feature width mismatch: model expects {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model format error at line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WldaConfig {
    /// Target dimension.
    pub r: usize,
    /// Relative bisection tolerance.
    pub sigma: f64,
    pub delta_cap: f64,
    pub max_bisection_steps: usize,
    pub feasibility: FeasibilityOptions,
}

impl WldaConfig {
    pub fn new(r: usize) -> Self {
        WldaConfig {
            r,
            sigma: 1e-3,
            delta_cap: 1e6,
            max_bisection_steps: 60,
            feasibility: FeasibilityOptions::default(),
        }
    }

    fn validate(&self, d: usize) -> Result<(), FitError> {
        if self.r == 0 || self.r > d {
            return Err(FitError::InvalidConfig(format!("target dimension {} not in 1..={d}", self.r)));
        }
        if !(self.sigma > 0.0) {
            return Err(FitError::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.delta_cap > 0.0) {
            return Err(FitError::InvalidConfig(format!("delta_cap must be positive, got {}", self.delta_cap)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepVerdict {
    Feasible,
    Infeasible,
    Indeterminate,
}

/// One feasibility solve made while bracketing or bisecting.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionStep {
    pub delta: f64,
    pub verdict: StepVerdict,
    /// Bracket after this step.
    pub delta_l: f64,
    pub delta_u: f64,
    pub dual_iterations: usize,
    pub solver_status: Status,
}

#[derive(Debug, Clone)]
pub struct DeltaBounds {
    pub delta_l: f64,
    pub delta_u: f64,
    pub z_init: SymMatrix,
    /// `rho_w == 0` at a candidate with `rho_b > 0`: the ratio has no finite maximum.
    pub unbounded: bool,
    /// `delta_u` was set by `delta_cap` rather than by a failed solve.
    pub capped: bool,
    pub steps: Vec<BisectionStep>,
    pub(crate) warm: Option<DualPoint>,
}

/// Linear map applied by a fitted model: optional PCA, then `y = W^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub w: Matrix,
    pub pca: Option<PcaBasis>,
}

impl Projection {
    pub fn input_dim(&self) -> usize {
        match &self.pca {
            Some(p) => p.input_dim(),
            None => self.w.rows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix, FitError> {
        if x.cols() != self.input_dim() {
            return Err(FitError::WidthMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        let reduced;
        let x = match &self.pca {
            Some(p) => {
                reduced = p.apply(x)?;
                &reduced
            }
            None => x,
        };
        Ok(x.matmul(&self.w)?)
    }
}

#[derive(Debug, Clone)]
pub struct WldaModel {
    pub projection: Projection,
    pub z: SymMatrix,
    pub delta_star: f64,
    /// Worst-case ratio at `Z*`.
    pub ratio_achieved: f64,
    /// Worst-case ratio at the rank-r projector `W W^T`.
    pub projector_ratio: f64,
    pub unbounded: bool,
    pub config: WldaConfig,
    pub history: Vec<BisectionStep>,
    pub dual_iterations: usize,
}

impl WldaModel {
    pub fn w(&self) -> &Matrix {
        &self.projection.w
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix, FitError> {
        self.projection.transform(x)
    }

    pub fn with_pca(mut self, pca: PcaBasis) -> Self {
        self.projection.pca = Some(pca);
        self
    }

    pub fn to_saved(&self) -> SavedModel {
        SavedModel {
            projection: self.projection.clone(),
            delta_star: self.delta_star,
            ratio_achieved: self.ratio_achieved,
        }
    }
}

/// The serialized subset of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub projection: Projection,
    pub delta_star: f64,
    pub ratio_achieved: f64,
}

fn ratio_value(wc: &WorstCase) -> f64 {
    if wc.rho_w <= 0.0 {
        if wc.rho_b > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        wc.ratio
    }
}

fn projector(w: &Matrix) -> SymMatrix {
    w.gram_outer()
}

/// Rescales scatters so the largest within-class trace is one.
fn normalize(scatters: &ScatterSet) -> ScatterSet {
    let within = scatters.within.iter().map(SymMatrix::trace).fold(0.0, f64::max);
    let between = scatters.between.iter().map(SymMatrix::trace).fold(0.0, f64::max);
    let scale = if within > 0.0 { within } else { between };
    if scale > 0.0 {
        scatters.scaled(1.0 / scale)
    } else {
        scatters.clone()
    }
}

fn record(steps: &mut Vec<BisectionStep>, delta: f64, outcome: &FeasibilityOutcome, delta_l: f64, delta_u: f64) {
    let verdict = match outcome.status {
        FeasibilityStatus::Feasible(_) => StepVerdict::Feasible,
        FeasibilityStatus::Infeasible(_) => StepVerdict::Infeasible,
        FeasibilityStatus::Indeterminate => StepVerdict::Indeterminate,
    };
    steps.push(BisectionStep {
        delta,
        verdict,
        delta_l,
        delta_u,
        dual_iterations: outcome.diagnostics.iterations,
        solver_status: outcome.diagnostics.solver_status,
    });
}

/// Called with every feasibility subproblem solved during a fit.
pub type SolveObserver<'a> = dyn FnMut(&FeasibilityProblem, &FeasibilityOutcome) + 'a;

fn solve_at(
    scatters: &ScatterSet,
    config: &WldaConfig,
    delta: f64,
    warm: Option<&DualPoint>,
    observer: &mut SolveObserver<'_>,
) -> Result<FeasibilityOutcome, FitError> {
    let problem = FeasibilityProblem::new(scatters, config.r, delta, config.feasibility.clone())?;
    let warm = warm.map(|p| DualPoint {
        u: p.u.iter().map(|&u| u.max(0.0)).collect(),
        v: p.v,
        p: p.p.clone(),
    });
    let outcome = match solve_feasibility(&problem, warm.as_ref()) {
        Ok(outcome) => outcome,
        Err(_) if warm.is_some() => solve_feasibility(&problem, None)?,
        Err(e) => return Err(e.into()),
    };
    observer(&problem, &outcome);
    Ok(outcome)
}

/// Initial bracket: `delta_l` from closed-form candidates, `delta_u` by doubling.
pub fn init_delta_bounds(scatters: &ScatterSet, r: usize, config: &WldaConfig) -> Result<DeltaBounds, FitError> {
    init_bounds_observed(scatters, r, config, &mut |_, _| {})
}

fn init_bounds_observed(
    scatters: &ScatterSet,
    r: usize,
    config: &WldaConfig,
    observer: &mut SolveObserver<'_>,
) -> Result<DeltaBounds, FitError> {
    let d = scatters.dim();
    let mut config = config.clone();
    config.r = r;
    config.validate(d)?;
    if scatters.between.iter().all(|s| s.trace() <= 0.0) {
        return Err(FitError::Degenerate);
    }

    let isotropic = SymMatrix::identity(d).scaled(r as f64 / d as f64);
    let between_top = projector(&top_r_eigvecs(&scatters.between_sum(), r)?);
    let mut best: Option<(f64, f64, SymMatrix)> = None;
    for z in [isotropic, between_top] {
        let wc = worst_case_objective(scatters, &z)?;
        let ratio = ratio_value(&wc);
        let better = match &best {
            None => true,
            Some((b, rho_b, _)) => ratio > *b || (ratio == *b && ratio.is_infinite() && wc.rho_b > *rho_b),
        };
        if better {
            best = Some((ratio, wc.rho_b, z));
        }
    }
    let (ratio, _, z_init) = best.expect("two candidates");

    if ratio.is_infinite() {
        return Ok(DeltaBounds {
            delta_l: f64::INFINITY,
            delta_u: f64::INFINITY,
            z_init,
            unbounded: true,
            capped: false,
            steps: Vec::new(),
            warm: None,
        });
    }

    let mut delta_l = ratio.min(config.delta_cap);
    let problem = FeasibilityProblem::new(scatters, r, delta_l, config.feasibility.clone())?;
    let mut slack = SymMatrix::identity(d);
    slack.axpy(-1.0, &z_init)?;
    let check = verify_primal(&problem, &z_init, &slack)?;
    if !check.passed {
        return Err(FitError::Uncertified {
            delta: delta_l,
            violation: check.max_violation(r, d),
        });
    }

    let mut z_best = z_init;
    let mut steps = Vec::new();
    let mut warm: Option<DualPoint> = None;
    let mut probe = (2.0 * delta_l).max(1.0);
    let (delta_u, capped) = loop {
        let at = probe.min(config.delta_cap);
        let outcome = solve_at(scatters, &config, at, warm.as_ref(), observer)?;
        let feasible = outcome.feasible_z().cloned();
        match feasible {
            Some(z) => {
                delta_l = at;
                z_best = z;
                warm = Some(outcome.final_point.clone());
                let capped = at >= config.delta_cap;
                record(&mut steps, at, &outcome, delta_l, if capped { at } else { f64::INFINITY });
                if capped {
                    break (at, true);
                }
            }
            None => {
                record(&mut steps, at, &outcome, delta_l, at);
                break (at, false);
            }
        }
        probe = at * 2.0;
    };

    Ok(DeltaBounds {
        delta_l,
        delta_u,
        z_init: z_best,
        unbounded: false,
        capped,
        steps,
        warm,
    })
}

/// Extreme-point recovery: top-r eigenvectors of `Z`.
pub fn recover_w(z: &SymMatrix, r: usize) -> Result<Matrix, FitError> {
    let w = top_r_eigvecs(z, r)?;
    debug_assert!(orthonormality_defect(&w) <= 1e-8);
    Ok(w)
}

fn stop(delta_l: f64, delta_u: f64, sigma: f64) -> bool {
    (delta_u - delta_l).abs() <= sigma * delta_l.max(1.0)
}

/// Fits from precomputed scatters.
pub fn fit_scatters(scatters: &ScatterSet, config: &WldaConfig) -> Result<WldaModel, FitError> {
    fit_scatters_observed(scatters, config, &mut |_, _| {})
}

/// [`fit_scatters`] reporting each subproblem to `observer`. Subproblems are
/// built on scatters rescaled so the largest within-class trace is one.
pub fn fit_scatters_observed(
    scatters: &ScatterSet,
    config: &WldaConfig,
    observer: &mut SolveObserver<'_>,
) -> Result<WldaModel, FitError> {
    config.validate(scatters.dim())?;
    let scatters = normalize(scatters);
    let bounds = init_bounds_observed(&scatters, config.r, config, observer)?;
    let mut history = bounds.steps.clone();

    let (delta_star, z_star) = if bounds.unbounded {
        (f64::INFINITY, bounds.z_init.clone())
    } else {
        let mut delta_l = bounds.delta_l;
        let mut delta_u = bounds.delta_u;
        let mut z_star = bounds.z_init.clone();
        let mut warm = bounds.warm.clone();
        let mut steps = 0;
        while !stop(delta_l, delta_u, config.sigma) && steps < config.max_bisection_steps {
            let mid = 0.5 * (delta_l + delta_u);
            let outcome = solve_at(&scatters, config, mid, warm.as_ref(), observer)?;
            match outcome.feasible_z() {
                Some(z) => {
                    delta_l = mid;
                    z_star = z.clone();
                    warm = Some(outcome.final_point.clone());
                }
                None => delta_u = mid,
            }
            record(&mut history, mid, &outcome, delta_l, delta_u);
            steps += 1;
        }
        (delta_l, z_star)
    };

    let w = recover_w(&z_star, config.r)?;
    let ratio_achieved = ratio_value(&worst_case_objective(&scatters, &z_star)?);
    let projector_ratio = ratio_value(&worst_case_objective(&scatters, &projector(&w))?);
    let dual_iterations = history.iter().map(|s| s.dual_iterations).sum();
    Ok(WldaModel {
        projection: Projection { w, pca: None },
        z: z_star,
        delta_star,
        ratio_achieved,
        projector_ratio,
        unbounded: bounds.unbounded,
        config: config.clone(),
        history,
        dual_iterations,
    })
}

pub fn fit_bisection(data: &Dataset, config: &WldaConfig) -> Result<WldaModel, FitError> {
    config.validate(data.dim())?;
    fit_scatters(&compute_scatters(data), config)
}

pub fn transform(model: &WldaModel, x: &Matrix) -> Result<Matrix, FitError> {
    model.transform(x)
}

fn write_row(out: &mut impl Write, row: &[f64]) -> std::io::Result<()> {
    let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
    writeln!(out, "{}", cells.join(" "))
}

fn write_matrix(out: &mut impl Write, m: &Matrix) -> std::io::Result<()> {
    for i in 0..m.rows() {
        write_row(out, m.row(i))?;
    }
    Ok(())
}

/// Writes the plain-text model format.
pub fn write_model(model: &SavedModel, out: &mut impl Write) -> std::io::Result<()> {
    let w = &model.projection.w;
    writeln!(out, "{MODEL_HEADER}")?;
    writeln!(
        out,
        "{} {} {:.16e} {:.16e}",
        w.rows(),
        w.cols(),
        model.delta_star,
        model.ratio_achieved
    )?;
    write_matrix(out, w)?;
    if let Some(pca) = &model.projection.pca {
        writeln!(out, "pca {} {}", pca.basis.rows(), pca.basis.cols())?;
        write_row(out, &pca.mean)?;
        write_matrix(out, &pca.basis)?;
    }
    Ok(())
}

struct LineReader<R> {
    inner: R,
    line: usize,
}

impl<R: BufRead> LineReader<R> {
    fn next(&mut self) -> Result<Option<String>, ModelIoError> {
        let mut buf = String::new();
        loop {
            buf.clear();
            if self.inner.read_line(&mut buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            if !buf.trim().is_empty() {
                return Ok(Some(buf.trim().to_string()));
            }
        }
    }

    fn require(&mut self) -> Result<String, ModelIoError> {
        self.next()?.ok_or_else(|| self.err("unexpected end of file"))
    }

    fn err(&self, message: impl Into<String>) -> ModelIoError {
        ModelIoError::Format {
            line: self.line,
            message: message.into(),
        }
    }

    fn floats(&mut self, expected: usize) -> Result<Vec<f64>, ModelIoError> {
        let line = self.require()?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("bad number {t:?}"))))
            .collect::<Result<_, _>>()?;
        if values.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", values.len())));
        }
        Ok(values)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix, ModelIoError> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.floats(cols)?);
        }
        Ok(Matrix::from_row_major(rows, cols, data))
    }
}

fn parse_usize<R: BufRead>(reader: &LineReader<R>, token: Option<&str>, what: &str) -> Result<usize, ModelIoError> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| reader.err(format!("missing or invalid {what}")))
}

fn parse_f64<R: BufRead>(reader: &LineReader<R>, token: Option<&str>, what: &str) -> Result<f64, ModelIoError> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| reader.err(format!("missing or invalid {what}")))
}

pub fn read_model(input: impl BufRead) -> Result<SavedModel, ModelIoError> {
    let mut reader = LineReader { inner: input, line: 0 };
    let header = reader.require()?;
    if header != MODEL_HEADER {
        return Err(reader.err(format!("expected header {MODEL_HEADER:?}")));
    }
    let dims = reader.require()?;
    let mut tokens = dims.split_whitespace();
    let d = parse_usize(&reader, tokens.next(), "d")?;
    let r = parse_usize(&reader, tokens.next(), "r")?;
    let delta_star = parse_f64(&reader, tokens.next(), "delta_star")?;
    let ratio_achieved = parse_f64(&reader, tokens.next(), "ratio_achieved")?;
    if d == 0 || r == 0 || r > d {
        return Err(reader.err(format!("invalid dimensions d={d}, r={r}")));
    }
    let w = reader.matrix(d, r)?;
    let pca = match reader.next()? {
        None => None,
        Some(line) => {
            let mut t = line.split_whitespace();
            if t.next() != Some("pca") {
                return Err(reader.err("expected `pca` block or end of file"));
            }
            let d_in = parse_usize(&reader, t.next(), "pca input dimension")?;
            let d_out = parse_usize(&reader, t.next(), "pca output dimension")?;
            if d_out != d {
                return Err(reader.err(format!("pca output dimension {d_out} does not match d={d}")));
            }
            let mean = reader.floats(d_in)?;
            let basis = reader.matrix(d_in, d_out)?;
            Some(PcaBasis { mean, basis })
        }
    };
    if reader.next()?.is_some() {
        return Err(reader.err("trailing content after model"));
    }
    Ok(SavedModel {
        projection: Projection { w, pca },
        delta_star,
        ratio_achieved,
    })
}
