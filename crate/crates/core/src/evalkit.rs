//! Evaluation harness: CSV ingestion, stratified splits, PCA, an LDA baseline,
//! k-NN classification and repeated-split experiments.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::scatter::{compute_scatters, DataError, Dataset};
use crate::symmat::{top_r_eigvecs, sym_eig, LinalgError, Matrix, SymMatrix};
use crate::wlda::{fit_bisection, FitError, WldaConfig};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: expected {expected} columns, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: {message}")]
    Cell { row: usize, column: usize, message: String },
    #[error("unknown label column {0}")]
    UnknownLabelColumn(String),
    #[error("file contains no data rows")]
    Empty,
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("class {class} has {count} samples; stratified splitting needs at least 2")]
    ClassTooSmall { class: usize, count: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// 0-based column index.
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.trim().to_string()),
        })
    }
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub dataset: Dataset,
    /// Original label strings; entry `k` is class `k` (first-appearance order).
    pub label_names: Vec<String>,
    pub feature_names: Option<Vec<String>>,
}

fn is_number(s: &str) -> bool {
    s.trim().parse::<f64>().is_ok()
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<LoadedData, CsvError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_labeled_csv(file, label_column)
}

/// Reads labelled rows. A header is assumed when the label column is given by
/// name or when any non-label cell of the first row is not numeric.
pub fn read_labeled_csv(input: impl Read, label_column: &LabelColumn) -> Result<LoadedData, CsvError> {
    let mut rows = read_rows(input)?;
    if rows.is_empty() {
        return Err(CsvError::Empty);
    }
    let first = rows.first().map(|(_, r)| r.clone()).unwrap_or_default();
    let width = first.len();
    let label_idx = match label_column {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(_) => return Err(CsvError::UnknownLabelColumn(label_column.to_string())),
        LabelColumn::Name(name) => first
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CsvError::UnknownLabelColumn(name.clone()))?,
    };
    let has_header = matches!(label_column, LabelColumn::Name(_))
        || first.iter().enumerate().any(|(j, c)| j != label_idx && !is_number(c));
    let header = if has_header { Some(rows.remove(0).1) } else { None };
    if rows.is_empty() {
        return Err(CsvError::Empty);
    }

    let d = width - 1;
    let mut data = Vec::with_capacity(rows.len() * d);
    let mut labels = Vec::with_capacity(rows.len());
    let mut label_names: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    for (line, row) in &rows {
        if row.len() != width {
            return Err(CsvError::Ragged {
                row: *line,
                expected: width,
                found: row.len(),
            });
        }
        for (j, cell) in row.iter().enumerate() {
            let cell = cell.trim();
            if j == label_idx {
                if cell.is_empty() {
                    return Err(CsvError::Cell {
                        row: *line,
                        column: j,
                        message: "missing label".into(),
                    });
                }
                let next = label_names.len();
                let class = *lookup.entry(cell.to_string()).or_insert_with(|| {
                    label_names.push(cell.to_string());
                    next
                });
                labels.push(class);
                continue;
            }
            if cell.is_empty() {
                return Err(CsvError::Cell {
                    row: *line,
                    column: j,
                    message: "missing value".into(),
                });
            }
            let value: f64 = cell.parse().map_err(|_| CsvError::Cell {
                row: *line,
                column: j,
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(CsvError::Cell {
                    row: *line,
                    column: j,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(value);
        }
    }
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(j, _)| *j != label_idx)
            .map(|(_, n)| n)
            .collect()
    });
    let samples = Matrix::from_row_major(rows.len(), d, data);
    let dataset = Dataset::new(samples, labels, label_names.len())?;
    Ok(LoadedData {
        dataset,
        label_names,
        feature_names,
    })
}

/// Reads an unlabelled numeric CSV (header auto-detected) for `transform`.
pub fn read_feature_csv(input: impl Read) -> Result<(Option<Vec<String>>, Matrix), CsvError> {
    let mut rows = read_rows(input)?;
    let header = match rows.first() {
        Some((_, r)) if r.iter().any(|c| !is_number(c)) => Some(rows.remove(0).1),
        _ => None,
    };
    if rows.is_empty() {
        return Err(CsvError::Empty);
    }
    let width = rows[0].1.len();
    let mut data = Vec::with_capacity(rows.len() * width);
    for (line, row) in &rows {
        if row.len() != width {
            return Err(CsvError::Ragged {
                row: *line,
                expected: width,
                found: row.len(),
            });
        }
        for (j, cell) in row.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| CsvError::Cell {
                row: *line,
                column: j,
                message: if cell.trim().is_empty() {
                    "missing value".into()
                } else {
                    format!("non-numeric value {:?}", cell.trim())
                },
            })?;
            data.push(value);
        }
    }
    Ok((header, Matrix::from_row_major(rows.len(), width, data)))
}

type Rows = Vec<(usize, Vec<String>)>;

fn read_rows(input: impl Read) -> Result<Rows, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(rows.len() + 1);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

/// Stratified split: per class, a seeded shuffle and the first
/// `ceil(fraction * n_k)` samples go to training, keeping at least one sample
/// on each side. Row order within each part follows the original order.
pub fn split_dataset(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), EvalError> {
    let (train_idx, test_idx) = split_indices(data, train_fraction, seed)?;
    Ok((subset(data, &train_idx)?, subset(data, &test_idx)?))
}

pub fn split_indices(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvalError::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class = vec![Vec::new(); data.num_classes()];
    for (i, &label) in data.labels().iter().enumerate() {
        by_class[label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.len() < 2 {
            return Err(EvalError::ClassTooSmall {
                class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n_train = ((train_fraction * members.len() as f64) - 1e-9).ceil() as usize;
        let n_train = n_train.clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn subset(data: &Dataset, idx: &[usize]) -> Result<Dataset, DataError> {
    let labels = idx.iter().map(|&i| data.labels()[i]).collect();
    Dataset::new(data.samples().select_rows(idx), labels, data.num_classes())
}

/// Fitted PCA map `x -> (x - mean)^T basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// `d_in x d_out`, column-orthonormal.
    pub basis: Matrix,
}

impl PcaBasis {
    pub fn input_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn fit(x: &Matrix, target_dim: usize) -> Result<PcaBasis, EvalError> {
        let (n, d) = (x.rows(), x.cols());
        if target_dim == 0 || target_dim > d {
            return Err(EvalError::InvalidConfig(format!(
                "PCA target dimension {target_dim} not in 1..={d}"
            )));
        }
        if n == 0 {
            return Err(EvalError::InvalidConfig("PCA needs at least one sample".into()));
        }
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let cov = SymMatrix::from_fn(d, |a, b| {
            (0..n).map(|i| (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b])).sum::<f64>() / n as f64
        });
        Ok(PcaBasis {
            mean,
            basis: top_r_eigvecs(&cov, target_dim)?,
        })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix, LinalgError> {
        if x.cols() != self.input_dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        let mut centered = x.clone();
        for i in 0..centered.rows() {
            for (v, m) in centered.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        centered.matmul(&self.basis)
    }
}

/// PCA fitted on `train` only and applied to both sets.
pub fn pca_fit_transform(train: &Matrix, test: &Matrix, target_dim: usize) -> Result<(Matrix, Matrix, PcaBasis), EvalError> {
    let basis = PcaBasis::fit(train, target_dim)?;
    Ok((basis.apply(train)?, basis.apply(test)?, basis))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaFit {
    /// `d x r`; satisfies `W^T (S_w + lambda I) W = I`.
    pub w: Matrix,
    /// Leading generalized eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub low_signal: bool,
}

fn lower_triangular_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l.get(i, k) * inv.get(k, col);
            }
            inv.set(i, col, s / l.get(i, i));
        }
    }
    inv
}

/// Classical LDA on pooled within-class scatter with a small ridge.
pub fn lda_fit(train: &Dataset, r: usize) -> Result<LdaFit, EvalError> {
    let c = train.num_classes();
    let d = train.dim();
    if r == 0 || r > c - 1 || r > d {
        return Err(EvalError::InvalidConfig(format!(
            "LDA target dimension {r} must lie in 1..={}",
            (c - 1).min(d)
        )));
    }
    let scatters = compute_scatters(train);
    let n = train.len() as f64;
    let mut total_mean = vec![0.0; d];
    for (mean, &count) in scatters.means.iter().zip(&scatters.counts) {
        for (t, m) in total_mean.iter_mut().zip(mean) {
            *t += count as f64 * m / n;
        }
    }
    let mut sw = SymMatrix::zeros(d);
    let mut sb = SymMatrix::zeros(d);
    for k in 0..c {
        let nk = scatters.counts[k] as f64;
        sw.axpy(nk, &scatters.within[k])?;
        let diff: Vec<f64> = scatters.means[k].iter().zip(&total_mean).map(|(a, b)| a - b).collect();
        sb.axpy(nk, &SymMatrix::outer(&diff))?;
    }
    let tr = sw.trace();
    let lambda = if tr > 0.0 { 1e-6 * tr / d as f64 } else { 1e-6 };
    sw.add_to_diagonal(lambda);
    let l_inv = lower_triangular_inverse(&sw.cholesky()?);
    let m = sb.congruence(&l_inv)?;
    let eig = sym_eig(&m)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let v = top_r_eigvecs(&m, r)?;
    let w = l_inv.transpose().matmul(&v)?;
    let eigenvalues: Vec<f64> = order.iter().take(r).map(|&k| eig.eigenvalues[k]).collect();
    let scale = m.frobenius_norm().max(1.0);
    let low_signal = eigenvalues[0] <= 1e-10 * scale;
    Ok(LdaFit {
        w,
        eigenvalues,
        low_signal,
    })
}

/// k-NN with Euclidean distance. Vote ties go to the tied class with the
/// nearest member, then to the smallest class index.
pub fn knn_classify(train: &Matrix, labels: &[usize], test: &Matrix, k: usize) -> Result<Vec<usize>, EvalError> {
    if train.rows() == 0 {
        return Err(EvalError::InvalidConfig("k-NN needs a non-empty training set".into()));
    }
    if labels.len() != train.rows() {
        return Err(EvalError::InvalidConfig(format!(
            "{} training rows but {} labels",
            train.rows(),
            labels.len()
        )));
    }
    if k == 0 || k > train.rows() {
        return Err(EvalError::InvalidConfig(format!("k must lie in 1..={}", train.rows())));
    }
    if test.cols() != train.cols() {
        return Err(LinalgError::DimensionMismatch {
            expected: train.cols(),
            got: test.cols(),
        }
        .into());
    }
    let num_labels = labels.iter().max().map_or(0, |m| m + 1);
    let predict = |q: &[f64]| {
        let mut dist: Vec<(f64, usize)> = (0..train.rows())
            .map(|i| {
                let d2 = train.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d2, i)
            })
            .collect();
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; num_labels];
        let mut nearest = vec![f64::INFINITY; num_labels];
        for &(d2, i) in &dist[..k] {
            let class = labels[i];
            votes[class] += 1;
            nearest[class] = nearest[class].min(d2);
        }
        (0..num_labels)
            .filter(|&c| votes[c] > 0)
            .min_by(|&a, &b| {
                votes[b]
                    .cmp(&votes[a])
                    .then(nearest[a].total_cmp(&nearest[b]))
                    .then(a.cmp(&b))
            })
            .expect("k >= 1")
    };
    Ok((0..test.rows()).into_par_iter().map(|i| predict(test.row(i))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Wlda,
    Lda,
    PcaOnly,
    Euclidean,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Wlda => "wlda",
            Method::Lda => "lda",
            Method::PcaOnly => "pca-only",
            Method::Euclidean => "euclidean",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data_path: PathBuf,
    pub label_column: LabelColumn,
    pub train_fraction: f64,
    pub runs: usize,
    pub k: usize,
    /// Target dimension; `None` means `c - 1`.
    pub r: Option<usize>,
    pub pca: Option<usize>,
    pub seed: u64,
    pub method: Method,
    /// Solver settings for `wlda`; its `r` is replaced per run.
    pub wlda: WldaConfig,
}

impl ExperimentConfig {
    pub fn new(data_path: impl Into<PathBuf>, label_column: LabelColumn, method: Method) -> Self {
        ExperimentConfig {
            data_path: data_path.into(),
            label_column,
            train_fraction: 0.7,
            runs: 30,
            k: 5,
            r: None,
            pca: None,
            seed: 0,
            method,
            wlda: WldaConfig::new(1),
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.runs == 0 {
            return Err(EvalError::InvalidConfig("runs must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(EvalError::InvalidConfig("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub error_rate: Option<f64>,
    pub failure: Option<String>,
    pub fit_seconds: f64,
    pub delta_star: Option<f64>,
    pub dual_iterations: Option<usize>,
    pub bisection_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: Method,
    pub data_path: PathBuf,
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub label_names: Vec<String>,
    pub target_dim: usize,
    pub pca: Option<usize>,
    pub k: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub runs: Vec<RunResult>,
    /// Over successful runs; `NaN` when none succeeded.
    pub mean: f64,
    pub std: f64,
    pub failures: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct FitInfo {
    delta_star: f64,
    dual_iterations: usize,
    bisection_steps: usize,
}

fn run_once(
    data: &Dataset,
    config: &ExperimentConfig,
    target_dim: usize,
    seed: u64,
) -> Result<(f64, Option<FitInfo>, f64), EvalError> {
    let (train, test) = split_dataset(data, config.train_fraction, seed)?;
    let (mut xtr, mut xte) = (train.samples().clone(), test.samples().clone());
    if let Some(p) = config.pca {
        let (a, b, _) = pca_fit_transform(&xtr, &xte, p)?;
        xtr = a;
        xte = b;
    }
    let start = Instant::now();
    let mut info = None;
    let (ytr, yte) = match config.method {
        Method::Euclidean => (xtr, xte),
        Method::PcaOnly => {
            let (a, b, _) = pca_fit_transform(&xtr, &xte, target_dim)?;
            (a, b)
        }
        Method::Lda => {
            let fit = lda_fit(&train.with_samples(xtr.clone())?, target_dim)?;
            (xtr.matmul(&fit.w)?, xte.matmul(&fit.w)?)
        }
        Method::Wlda => {
            let mut cfg = config.wlda.clone();
            cfg.r = target_dim;
            let model = fit_bisection(&train.with_samples(xtr.clone())?, &cfg)?;
            info = Some(FitInfo {
                delta_star: model.delta_star,
                dual_iterations: model.dual_iterations,
                bisection_steps: model.history.len(),
            });
            (model.transform(&xtr)?, model.transform(&xte)?)
        }
    };
    let fit_seconds = start.elapsed().as_secs_f64();
    let k = config.k.min(ytr.rows());
    let predicted = knn_classify(&ytr, train.labels(), &yte, k)?;
    let wrong = predicted.iter().zip(test.labels()).filter(|(p, t)| p != t).count();
    let rate = if test.is_empty() { 0.0 } else { wrong as f64 / test.len() as f64 };
    Ok((rate, info, fit_seconds))
}

/// Loads the configured CSV and runs every split.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, EvalError> {
    config.validate()?;
    let loaded = load_csv(&config.data_path, &config.label_column)?;
    run_on_data(&loaded, config)
}

/// Runs every split on already-loaded data. Runs execute in parallel; run `i`
/// uses seed `config.seed + i`.
pub fn run_on_data(loaded: &LoadedData, config: &ExperimentConfig) -> Result<ExperimentReport, EvalError> {
    config.validate()?;
    let data = &loaded.dataset;
    let c = data.num_classes();
    let d_eff = config.pca.unwrap_or(data.dim());
    if config.pca.is_some_and(|p| p == 0 || p > data.dim()) {
        return Err(EvalError::InvalidConfig(format!(
            "PCA dimension must lie in 1..={}",
            data.dim()
        )));
    }
    let target_dim = config.r.unwrap_or(c - 1);
    if config.method != Method::Euclidean && (target_dim == 0 || target_dim > d_eff) {
        return Err(EvalError::InvalidConfig(format!(
            "target dimension {target_dim} must lie in 1..={d_eff}"
        )));
    }
    let runs: Vec<RunResult> = (0..config.runs)
        .into_par_iter()
        .map(|i| {
            let seed = config.seed.wrapping_add(i as u64);
            let (error_rate, failure, info, fit_seconds) = match run_once(data, config, target_dim, seed) {
                Ok((rate, info, secs)) => (Some(rate), None, info, secs),
                Err(e) => (None, Some(e.to_string()), None, 0.0),
            };
            RunResult {
                run: i,
                seed,
                error_rate,
                failure,
                fit_seconds,
                delta_star: info.as_ref().map(|f| f.delta_star),
                dual_iterations: info.as_ref().map(|f| f.dual_iterations),
                bisection_steps: info.as_ref().map(|f| f.bisection_steps),
            }
        })
        .collect();
    let rates: Vec<f64> = runs.iter().filter_map(|r| r.error_rate).collect();
    let (mean, std) = mean_std(&rates);
    Ok(ExperimentReport {
        method: config.method,
        data_path: config.data_path.clone(),
        samples: data.len(),
        features: data.dim(),
        classes: c,
        label_names: loaded.label_names.clone(),
        target_dim,
        pca: config.pca,
        k: config.k,
        train_fraction: config.train_fraction,
        seed: config.seed,
        failures: runs.len() - rates.len(),
        runs,
        mean,
        std,
    })
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl ExperimentReport {
    /// Text table. With `include_timing == false` the output depends only on
    /// the configuration and data.
    pub fn render_table(&self, include_timing: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method: {}", self.method.name());
        let _ = writeln!(
            out,
            "data: {} (n={}, d={}, c={})",
            self.data_path.display(),
            self.samples,
            self.features,
            self.classes
        );
        let labels: Vec<String> = self
            .label_names
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{}={n}", i + 1))
            .collect();
        let _ = writeln!(out, "labels: {}", labels.join(", "));
        let _ = writeln!(
            out,
            "protocol: {} runs, train fraction {}, {}-NN, target dim {}, pca {}",
            self.runs.len(),
            self.train_fraction,
            self.k,
            self.target_dim,
            opt(self.pca)
        );
        out.push('\n');
        let _ = write!(out, "{:>4} {:>8} {:>10} {:>14} {:>8} {:>10}", "run", "seed", "error%", "delta*", "steps", "dual_iter");
        if include_timing {
            let _ = write!(out, " {:>10}", "fit_s");
        }
        out.push('\n');
        for r in &self.runs {
            let error = r.error_rate.map_or("FAILED".to_string(), |e| format!("{:.4}", 100.0 * e));
            let delta = r.delta_star.map_or("-".to_string(), |d| format!("{d:.6}"));
            let _ = write!(
                out,
                "{:>4} {:>8} {:>10} {:>14} {:>8} {:>10}",
                r.run,
                r.seed,
                error,
                delta,
                opt(r.bisection_steps),
                opt(r.dual_iterations)
            );
            if include_timing {
                let _ = write!(out, " {:>10.4}", r.fit_seconds);
            }
            out.push('\n');
            if let Some(f) = &r.failure {
                let _ = writeln!(out, "     failure: {f}");
            }
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "error: {:.2} ({:.2}) over {} successful runs, {} failed",
            100.0 * self.mean,
            100.0 * self.std,
            self.runs.len() - self.failures,
            self.failures
        );
        out
    }

    /// Machine-readable `key=value` lines.
    pub fn render_key_values(&self, include_timing: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method={}", self.method.name());
        let _ = writeln!(out, "samples={}", self.samples);
        let _ = writeln!(out, "features={}", self.features);
        let _ = writeln!(out, "classes={}", self.classes);
        let _ = writeln!(out, "target_dim={}", self.target_dim);
        let _ = writeln!(out, "pca={}", opt(self.pca));
        let _ = writeln!(out, "knn={}", self.k);
        let _ = writeln!(out, "train_fraction={}", self.train_fraction);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "runs={}", self.runs.len());
        let _ = writeln!(out, "failures={}", self.failures);
        let _ = writeln!(out, "mean_error={:.17e}", self.mean);
        let _ = writeln!(out, "std_error={:.17e}", self.std);
        let rates: Vec<String> = self
            .runs
            .iter()
            .map(|r| r.error_rate.map_or("nan".to_string(), |e| format!("{e:.17e}")))
            .collect();
        let _ = writeln!(out, "error_rates={}", rates.join(","));
        if self.method == Method::Wlda {
            let deltas: Vec<String> = self.runs.iter().map(|r| opt(r.delta_star)).collect();
            let _ = writeln!(out, "delta_star={}", deltas.join(","));
        }
        if include_timing {
            let total: f64 = self.runs.iter().map(|r| r.fit_seconds).sum();
            let _ = writeln!(out, "mean_fit_seconds={:.6}", total / self.runs.len() as f64);
        }
        out
    }

    pub fn render(&self, include_timing: bool) -> String {
        format!(
            "{}\n[summary]\n{}",
            self.render_table(include_timing),
            self.render_key_values(include_timing)
        )
    }
}

/// Projected coordinates with labels, as `y1,...,yr,label` CSV text.
pub fn projected_csv(y: &Matrix, labels: Option<&[String]>) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=y.cols()).map(|j| format!("y{j}")).collect();
    out.push_str(&header.join(","));
    if labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for i in 0..y.rows() {
        let cells: Vec<String> = y.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        if let Some(l) = labels {
            out.push(',');
            out.push_str(&l[i]);
        }
        out.push('\n');
    }
    out
}
