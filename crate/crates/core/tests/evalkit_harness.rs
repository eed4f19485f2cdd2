mod common;

use std::path::PathBuf;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use sdwlda::evalkit::{
    knn_classify, lda_fit, load_csv, pca_fit_transform, run_experiment, run_on_data, split_dataset, split_indices,
    ExperimentConfig, LabelColumn, LoadedData, Method,
};
use sdwlda::scatter::Dataset;
use sdwlda::symmat::Matrix;
use sdwlda::wlda::{fit_bisection, WldaConfig};

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn brute_force_knn(train: &Matrix, labels: &[usize], q: &[f64], k: usize) -> usize {
    let mut order: Vec<(f64, usize)> = (0..train.rows())
        .map(|i| (train.row(i).iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum(), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let classes = labels.iter().max().unwrap() + 1;
    let mut best = (0usize, f64::INFINITY, usize::MAX);
    for c in 0..classes {
        let members: Vec<f64> = order[..k].iter().filter(|(_, i)| labels[*i] == c).map(|(d, _)| *d).collect();
        if members.is_empty() {
            continue;
        }
        let votes = members.len();
        let nearest = members[0];
        if votes > best.0 || (votes == best.0 && nearest < best.1) {
            best = (votes, nearest, c);
        }
    }
    best.2
}

#[test]
fn iris_loads_with_expected_shape() {
    let loaded = load_csv(data_file("iris.csv"), &LabelColumn::Name("species".into())).unwrap();
    let data = &loaded.dataset;
    assert_eq!((data.len(), data.dim(), data.num_classes()), (150, 4, 3));
    assert_eq!(data.class_counts(), vec![50, 50, 50]);
    let (train, test) = split_dataset(data, 0.7, 0).unwrap();
    assert_eq!((train.len(), test.len()), (105, 45));
    let by_index = load_csv(data_file("iris.csv"), &LabelColumn::Index(4)).unwrap();
    assert_eq!(by_index.dataset, loaded.dataset);
}

#[test]
fn balance_loads_with_expected_shape() {
    let loaded = load_csv(data_file("balance-scale.csv"), &LabelColumn::Index(0)).unwrap();
    assert_eq!(loaded.dataset.len(), 625);
    assert_eq!(loaded.dataset.dim(), 4);
    assert_eq!(loaded.dataset.num_classes(), 3);
}

#[test]
fn pca_variance_is_sum_of_top_eigenvalues() {
    let mut rng = rng(7);
    let data = random_dataset(&mut rng, 6, 2, 50);
    let x = data.samples();
    let (y, _, _) = pca_fit_transform(x, x, 3).unwrap();
    let n = x.rows() as f64;
    let projected: f64 = (0..3)
        .map(|j| {
            let mean = (0..y.rows()).map(|i| y.get(i, j)).sum::<f64>() / n;
            (0..y.rows()).map(|i| (y.get(i, j) - mean).powi(2)).sum::<f64>() / n
        })
        .sum();
    let mean: Vec<f64> = (0..6).map(|j| (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n).collect();
    let cov: Dense = (0..6)
        .map(|a| {
            (0..6)
                .map(|b| (0..x.rows()).map(|i| (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b])).sum::<f64>() / n)
                .collect()
        })
        .collect();
    let (mut vals, _) = jacobi_eig(&cov);
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!((projected - vals[..3].iter().sum::<f64>()).abs() <= 1e-8);
}

#[test]
fn pca_reconstructs_subspace_data_exactly() {
    let mut rng = rng(8);
    let rows: Vec<Vec<f64>> = (0..30)
        .map(|_| {
            let a = normal(&mut rng);
            let b = normal(&mut rng);
            vec![a, b, a + b, a - 2.0 * b]
        })
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let (y, _, basis) = pca_fit_transform(&x, &x, 2).unwrap();
    let back = y.matmul(&basis.basis.transpose()).unwrap();
    for i in 0..x.rows() {
        for j in 0..4 {
            assert!((back.get(i, j) + basis.mean[j] - x.get(i, j)).abs() < 1e-10);
        }
    }
}

#[test]
fn lda_aligns_with_mean_difference() {
    // Each class is a symmetric cross, so every within-class scatter is a multiple of I.
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, m) in [(0usize, [0.0, 0.0]), (1, [3.0, 4.0])] {
        for (dx, dy) in [(0.5, 0.0), (-0.5, 0.0), (0.0, 0.5), (0.0, -0.5)] {
            rows.push(vec![m[0] + dx, m[1] + dy]);
            labels.push(k);
        }
    }
    let data = Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap();
    let fit = lda_fit(&data, 1).unwrap();
    let w = fit.w.column(0);
    let cos = (w[0] * 3.0 + w[1] * 4.0).abs() / (5.0 * (w[0] * w[0] + w[1] * w[1]).sqrt());
    assert!(cos >= 0.999, "{cos}");
    assert!(!fit.low_signal);
}

#[test]
fn lda_flags_identical_means() {
    let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
    let data = Dataset::new(Matrix::from_rows(&rows).unwrap(), vec![0, 0, 1, 1], 2).unwrap();
    let fit = lda_fit(&data, 1).unwrap();
    assert!(fit.low_signal);
    assert_eq!(fit.w.cols(), 1);
}

#[test]
fn lda_helps_knn_on_gaussian_blobs() {
    let mut lda_err = 0.0;
    let mut raw_err = 0.0;
    for seed in 0..20 {
        let mut rng = rng(500 + seed);
        let data = random_dataset(&mut rng, 6, 3, 40);
        let (train, test) = split_dataset(&data, 0.7, seed).unwrap();
        let fit = lda_fit(&train, 2).unwrap();
        let err = |tr: &Matrix, te: &Matrix| {
            let p = knn_classify(tr, train.labels(), te, 5).unwrap();
            p.iter().zip(test.labels()).filter(|(a, b)| a != b).count() as f64 / test.len() as f64
        };
        lda_err += err(&train.samples().matmul(&fit.w).unwrap(), &test.samples().matmul(&fit.w).unwrap());
        raw_err += err(train.samples(), test.samples());
    }
    assert!(lda_err <= raw_err + 0.02 * 20.0, "{lda_err} vs {raw_err}");
}

#[test]
fn knn_with_all_points_is_global_majority() {
    let train = Matrix::from_rows(&[vec![0.0], vec![5.0], vec![6.0], vec![7.0]]).unwrap();
    let q = Matrix::from_rows(&[vec![0.0], vec![5.4]]).unwrap();
    assert_eq!(knn_classify(&train, &[0, 1, 1, 0], &q, 4).unwrap(), vec![0, 1]);
    assert_eq!(knn_classify(&train, &[0, 1, 1, 1], &q, 4).unwrap(), vec![1, 1]);
}

#[test]
fn model_ignores_test_rows() {
    let mut rng = rng(11);
    let data = random_dataset(&mut rng, 4, 3, 20);
    let (train_idx, test_idx) = split_indices(&data, 0.7, 3).unwrap();
    let mut mutated = data.samples().clone();
    for &i in &test_idx {
        for v in mutated.row_mut(i) {
            *v = 1e3 * normal(&mut rng);
        }
    }
    let mutated = data.with_samples(mutated).unwrap();
    let (a, _) = split_dataset(&data, 0.7, 3).unwrap();
    let (b, _) = split_dataset(&mutated, 0.7, 3).unwrap();
    assert_eq!(a, b);
    assert!(!train_idx.is_empty());
    let (pa, _, basis_a) = pca_fit_transform(a.samples(), data.samples(), 3).unwrap();
    let (pb, _, basis_b) = pca_fit_transform(b.samples(), mutated.samples(), 3).unwrap();
    assert_eq!(basis_a, basis_b);
    let wa = fit_bisection(&a.with_samples(pa).unwrap(), &WldaConfig::new(2)).unwrap();
    let wb = fit_bisection(&b.with_samples(pb).unwrap(), &WldaConfig::new(2)).unwrap();
    assert_eq!(wa.w(), wb.w());
}

#[test]
fn experiment_reports_are_deterministic() {
    let mut config = ExperimentConfig::new(data_file("iris.csv"), LabelColumn::Index(4), Method::Wlda);
    config.runs = 1;
    config.seed = 42;
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    assert_eq!(a.render(false), b.render(false));
    config.runs = 5;
    let c = run_experiment(&config).unwrap();
    let d = run_experiment(&config).unwrap();
    assert_eq!(c.render(false), d.render(false));
    assert!(c.runs.iter().all(|r| r.error_rate.is_some_and(|e| (0.0..=1.0).contains(&e))));
}

#[test]
fn failed_runs_are_reported() {
    let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    let labels = (0..12).map(|i| i % 2).collect();
    let loaded = LoadedData {
        dataset: Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap(),
        label_names: vec!["a".into(), "b".into()],
        feature_names: None,
    };
    let mut config = ExperimentConfig::new("mem", LabelColumn::Index(0), Method::Lda);
    config.runs = 3;
    config.k = 50;
    let report = run_on_data(&loaded, &config).unwrap();
    assert_eq!(report.failures, 0, "k is clamped to the training size");
    config.method = Method::Wlda;
    config.wlda.sigma = -1.0;
    let report = run_on_data(&loaded, &config).unwrap();
    assert_eq!(report.failures, 3);
    assert!(report.mean.is_nan());
    assert!(report.render(false).contains("FAILED"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_brute_force(seed in 0u64..100_000, k in 1usize..8) {
        let mut rng = rng(seed);
        let n = rng.random_range(k..30);
        // Coarse integer coordinates force distance ties.
        let train = Matrix::from_rows(&(0..n).map(|_| vec![rng.random_range(0..4) as f64, rng.random_range(0..4) as f64]).collect::<Vec<_>>()).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let test = Matrix::from_rows(&(0..10).map(|_| vec![rng.random_range(0..4) as f64, rng.random_range(0..4) as f64]).collect::<Vec<_>>()).unwrap();
        let got = knn_classify(&train, &labels, &test, k).unwrap();
        for (i, g) in got.iter().enumerate() {
            let expected = brute_force_knn(&train, &labels, test.row(i), k);
            prop_assert_eq!(*g, expected);
        }
    }

    #[test]
    fn splits_are_stratified(seed in 0u64..100_000, frac in 0.1f64..0.9) {
        let mut rng = rng(seed);
        let per_class = rng.random_range(2..20);
        let data = random_dataset(&mut rng, 2, 3, per_class);
        let (train, test) = split_dataset(&data, frac, seed).unwrap();
        for (k, &n) in data.class_counts().iter().enumerate() {
            let expected = ((frac * n as f64) - 1e-9).ceil() as usize;
            prop_assert_eq!(train.class_counts()[k], expected.clamp(1, n - 1));
            prop_assert_eq!(train.class_counts()[k] + test.class_counts()[k], n);
        }
    }
}
