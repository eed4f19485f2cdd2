//! Class statistics and the worst-case scatter measures.

use thiserror::Error;

use crate::symmat::{trace_inner, LinalgError, Matrix, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dataset has {samples} samples but {labels} labels")]
    LabelCount { samples: usize, labels: usize },
    #[error("dataset must contain at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("label {label} at row {row} is out of range for {classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        classes: usize,
    },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dataset has no features")]
    NoFeatures,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Labelled samples. Labels are 0-based class indices `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self, DataError> {
        if samples.rows() != labels.len() {
            return Err(DataError::LabelCount {
                samples: samples.rows(),
                labels: labels.len(),
            });
        }
        if samples.cols() == 0 {
            return Err(DataError::NoFeatures);
        }
        if num_classes < 2 {
            return Err(DataError::TooFewClasses(num_classes));
        }
        let mut counts = vec![0usize; num_classes];
        for (row, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(DataError::LabelOutOfRange {
                    row,
                    label,
                    classes: num_classes,
                });
            }
            counts[label] += 1;
        }
        if let Some(k) = counts.iter().position(|&n| n == 0) {
            return Err(DataError::EmptyClass(k));
        }
        for row in 0..samples.rows() {
            if let Some(col) = samples.row(row).iter().position(|x| !x.is_finite()) {
                return Err(DataError::NonFinite { row, col });
            }
        }
        Ok(Dataset {
            samples,
            labels,
            num_classes,
        })
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Same labels, new features (row count must match).
    pub fn with_samples(&self, samples: Matrix) -> Result<Self, DataError> {
        Dataset::new(samples, self.labels.clone(), self.num_classes)
    }
}

/// Number of unordered class pairs.
pub fn pair_count(num_classes: usize) -> usize {
    num_classes * (num_classes - 1) / 2
}

/// Class pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn class_pairs(num_classes: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(pair_count(num_classes));
    for i in 0..num_classes {
        for j in (i + 1)..num_classes {
            pairs.push((i, j));
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSet {
    pub means: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    /// Per-class covariance `S_k` (normalized by `n_k`).
    pub within: Vec<SymMatrix>,
    /// `S_ij` for each pair in [`class_pairs`] order.
    pub between: Vec<SymMatrix>,
    pub pairs: Vec<(usize, usize)>,
}

impl ScatterSet {
    pub fn dim(&self) -> usize {
        self.within[0].dim()
    }

    pub fn num_classes(&self) -> usize {
        self.within.len()
    }

    /// Every scatter multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> ScatterSet {
        ScatterSet {
            means: self.means.clone(),
            counts: self.counts.clone(),
            within: self.within.iter().map(|s| s.scaled(alpha)).collect(),
            between: self.between.iter().map(|s| s.scaled(alpha)).collect(),
            pairs: self.pairs.clone(),
        }
    }

    /// Sum of all between-class scatters.
    pub fn between_sum(&self) -> SymMatrix {
        let mut acc = SymMatrix::zeros(self.dim());
        for s in &self.between {
            acc.axpy(1.0, s).expect("dims agree");
        }
        acc
    }
}

pub fn compute_scatters(data: &Dataset) -> ScatterSet {
    let d = data.dim();
    let c = data.num_classes();
    let x = data.samples();
    let counts = data.class_counts();

    let mut means = vec![vec![0.0; d]; c];
    for (row, &l) in data.labels().iter().enumerate() {
        for (m, v) in means[l].iter_mut().zip(x.row(row)) {
            *m += v;
        }
    }
    for (m, &n) in means.iter_mut().zip(&counts) {
        for v in m.iter_mut() {
            *v /= n as f64;
        }
    }

    let mut within = vec![SymMatrix::zeros(d); c];
    let mut dev = vec![0.0; d];
    for (row, &l) in data.labels().iter().enumerate() {
        for ((dv, xv), mv) in dev.iter_mut().zip(x.row(row)).zip(&means[l]) {
            *dv = xv - mv;
        }
        within[l].axpy(1.0, &SymMatrix::outer(&dev)).expect("dims agree");
    }
    for (s, &n) in within.iter_mut().zip(&counts) {
        *s = s.scaled(1.0 / n as f64);
    }

    let pairs = class_pairs(c);
    let between = pairs
        .iter()
        .map(|&(i, j)| {
            let diff: Vec<f64> = means[i].iter().zip(&means[j]).map(|(a, b)| a - b).collect();
            SymMatrix::outer(&diff)
        })
        .collect();

    ScatterSet {
        means,
        counts,
        within,
        between,
        pairs,
    }
}

/// Worst-case between/within measures at a given `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub rho_b: f64,
    pub rho_w: f64,
    /// `rho_b / rho_w`, or `+inf` when `rho_w <= 0`.
    pub ratio: f64,
    pub unbounded: bool,
    pub argmin_pair: (usize, usize),
    pub argmax_class: usize,
}

pub fn worst_case_objective(scatters: &ScatterSet, z: &SymMatrix) -> Result<WorstCase, LinalgError> {
    let mut rho_b = f64::INFINITY;
    let mut argmin_pair = scatters.pairs[0];
    for (s, &pair) in scatters.between.iter().zip(&scatters.pairs) {
        let t = trace_inner(s, z)?;
        if t < rho_b {
            rho_b = t;
            argmin_pair = pair;
        }
    }
    let mut rho_w = f64::NEG_INFINITY;
    let mut argmax_class = 0;
    for (k, s) in scatters.within.iter().enumerate() {
        let t = trace_inner(s, z)?;
        if t > rho_w {
            rho_w = t;
            argmax_class = k;
        }
    }
    let unbounded = rho_w <= 0.0;
    let ratio = if unbounded { f64::INFINITY } else { rho_b / rho_w };
    Ok(WorstCase {
        rho_b,
        rho_w,
        ratio,
        unbounded,
        argmin_pair,
        argmax_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(rows: &[[f64; 2]], labels: &[usize], c: usize) -> Dataset {
        let m = Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        Dataset::new(m, labels.to_vec(), c).unwrap()
    }

    pub(crate) fn diag_instance() -> ScatterSet {
        ScatterSet {
            means: vec![vec![0.0, 0.0], vec![3.0, 0.0]],
            counts: vec![1, 1],
            within: vec![SymMatrix::from_diag(&[1.0, 4.0]), SymMatrix::from_diag(&[2.0, 1.0])],
            between: vec![SymMatrix::from_diag(&[9.0, 0.0])],
            pairs: vec![(0, 1)],
        }
    }

    #[test]
    fn single_sample_class_has_zero_scatter() {
        let data = dataset(&[[1.0, 2.0], [0.0, 0.0], [2.0, 0.0]], &[0, 1, 1], 2);
        let s = compute_scatters(&data);
        assert_eq!(s.within[0], SymMatrix::zeros(2));
        assert_eq!(s.means[1], vec![1.0, 0.0]);
        assert_eq!(s.within[1], SymMatrix::from_diag(&[1.0, 0.0]));
    }

    #[test]
    fn between_scatter_outer_product() {
        let data = dataset(&[[1.0, 0.0], [1.0, 3.0]], &[0, 1], 2);
        let s = compute_scatters(&data);
        assert_eq!(s.between[0], SymMatrix::from_diag(&[0.0, 9.0]));
    }

    #[test]
    fn pair_order_is_lexicographic() {
        assert_eq!(class_pairs(4), vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn invalid_datasets_rejected() {
        let m = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(
            Dataset::new(m.clone(), vec![0, 0], 2).unwrap_err(),
            DataError::EmptyClass(1)
        );
        assert_eq!(Dataset::new(m.clone(), vec![0, 0], 1).unwrap_err(), DataError::TooFewClasses(1));
        assert!(matches!(
            Dataset::new(m.clone(), vec![0], 2),
            Err(DataError::LabelCount { .. })
        ));
        let bad = Matrix::from_rows(&[vec![1.0], vec![f64::INFINITY]]).unwrap();
        assert_eq!(
            Dataset::new(bad, vec![0, 1], 2).unwrap_err(),
            DataError::NonFinite { row: 1, col: 0 }
        );
    }

    #[test]
    fn zero_projection_is_unbounded() {
        let w = worst_case_objective(&diag_instance(), &SymMatrix::zeros(2)).unwrap();
        assert_eq!((w.rho_b, w.rho_w), (0.0, 0.0));
        assert!(w.unbounded);
        assert!(w.ratio.is_infinite());
    }

    #[test]
    fn diag_instance_values() {
        let s = diag_instance();
        let w = worst_case_objective(&s, &SymMatrix::from_diag(&[1.0, 0.0])).unwrap();
        assert_eq!((w.rho_b, w.rho_w, w.ratio), (9.0, 2.0, 4.5));
        assert_eq!(w.argmax_class, 1);
        let w = worst_case_objective(&s, &SymMatrix::from_diag(&[0.0, 1.0])).unwrap();
        assert_eq!((w.rho_b, w.rho_w, w.ratio), (0.0, 4.0, 0.0));
        assert_eq!(w.argmax_class, 0);
    }

    #[test]
    fn objective_dimension_mismatch() {
        assert!(worst_case_objective(&diag_instance(), &SymMatrix::identity(3)).is_err());
    }

    fn data_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (2usize..4, 1usize..4).prop_flat_map(|(c, d)| {
            let n = c * 3;
            (
                proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, d), n),
                Just((0..n).map(|i| i % c).collect::<Vec<_>>()),
            )
        })
    }

    fn build(rows: &[Vec<f64>], labels: &[usize]) -> Dataset {
        let c = labels.iter().max().unwrap() + 1;
        Dataset::new(Matrix::from_rows(rows).unwrap(), labels.to_vec(), c).unwrap()
    }

    fn max_diff(a: &ScatterSet, b: &ScatterSet, f: impl Fn(&SymMatrix) -> SymMatrix) -> f64 {
        a.within
            .iter()
            .zip(&b.within)
            .chain(a.between.iter().zip(&b.between))
            .map(|(x, y)| f(x).sub(y).unwrap().frobenius_norm() / y.frobenius_norm().max(1.0))
            .fold(0.0, f64::max)
    }

    proptest! {
        #[test]
        fn translation_invariant((rows, labels) in data_strategy(), shift in -10.0f64..10.0) {
            let base = compute_scatters(&build(&rows, &labels));
            let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect();
            let shifted = compute_scatters(&build(&moved, &labels));
            prop_assert!(max_diff(&base, &shifted, |s| s.clone()) <= 1e-10);
        }

        #[test]
        fn scale_equivariant((rows, labels) in data_strategy(), alpha in 0.1f64..5.0) {
            let base = compute_scatters(&build(&rows, &labels));
            let scaled_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x * alpha).collect()).collect();
            let scaled = compute_scatters(&build(&scaled_rows, &labels));
            prop_assert!(max_diff(&base, &scaled, |s| s.scaled(alpha * alpha)) <= 1e-10);
        }

        #[test]
        fn rotation_equivariant((rows, labels) in data_strategy(), angle in 0.0f64..6.3) {
            let d = rows[0].len();
            // Givens rotation in the first two coordinates (identity when d = 1 with angle pi).
            let mut rot = Matrix::identity(d);
            if d >= 2 {
                rot.set(0, 0, angle.cos());
                rot.set(0, 1, -angle.sin());
                rot.set(1, 0, angle.sin());
                rot.set(1, 1, angle.cos());
            } else {
                rot.set(0, 0, -1.0);
            }
            let rotated: Vec<Vec<f64>> = rows.iter().map(|r| {
                (0..d).map(|i| (0..d).map(|j| rot.get(i, j) * r[j]).sum()).collect()
            }).collect();
            let base = compute_scatters(&build(&rows, &labels));
            let turned = compute_scatters(&build(&rotated, &labels));
            prop_assert!(max_diff(&base, &turned, |s| s.congruence(&rot).unwrap()) <= 1e-9);
        }

        #[test]
        fn objective_matches_naive_loops((rows, labels) in data_strategy(), seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let s = compute_scatters(&build(&rows, &labels));
            let d = s.dim();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let z = SymMatrix::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            let dense_trace = |a: &SymMatrix| -> f64 {
                let mut t = 0.0;
                for i in 0..d { for j in 0..d { t += a.get(i, j) * z.get(j, i); } }
                t
            };
            let mut rho_b = f64::INFINITY;
            for sij in &s.between { rho_b = rho_b.min(dense_trace(sij)); }
            let mut rho_w = f64::NEG_INFINITY;
            for sk in &s.within { rho_w = rho_w.max(dense_trace(sk)); }
            let w = worst_case_objective(&s, &z).unwrap();
            prop_assert!((w.rho_b - rho_b).abs() <= 1e-12 * rho_b.abs().max(1.0));
            prop_assert!((w.rho_w - rho_w).abs() <= 1e-12 * rho_w.abs().max(1.0));
        }
    }
}
