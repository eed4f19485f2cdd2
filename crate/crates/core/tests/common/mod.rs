//! Shared test oracles. Nothing here calls into the library's linear algebra.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sdwlda::scatter::{compute_scatters, Dataset, ScatterSet};
use sdwlda::sdpfeas::{DualPoint, FeasibilityOptions, FeasibilityProblem};
use sdwlda::symmat::{Matrix, SymMatrix};

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn to_dense(s: &SymMatrix) -> Dense {
    let d = s.dim();
    (0..d).map(|i| (0..d).map(|j| s.get(i, j)).collect()).collect()
}

/// Cyclic Jacobi with plain dense storage; eigenvectors are the columns of the second result.
pub fn jacobi_eig(a: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Dense = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

pub fn dense_psd_part(a: &Dense) -> Dense {
    let n = a.len();
    let (vals, vecs) = jacobi_eig(a);
    let mut out = vec![vec![0.0; n]; n];
    for (k, &l) in vals.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[i][j] += l * vecs[i][k] * vecs[j][k];
            }
        }
    }
    out
}

pub fn dense_inner(a: &Dense, b: &Dense) -> f64 {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x * y).sum::<f64>()).sum()
}

/// Full `2d x 2d` dual: `Abar = sum u Sbar + v Ibar + sum p H`, with
/// `Sbar = blockdiag(D, 0)`, `Ibar = blockdiag(I, 0)` and `H_st` the
/// symmetric unit pattern in both diagonal blocks. Returns `(f, grad)` with
/// the gradient ordered `[u, v, p]`.
pub fn dense_dual(problem: &FeasibilityProblem, point: &DualPoint) -> (f64, Vec<f64>) {
    let d = problem.dim();
    let n = 2 * d;
    let embed_top = |m: &SymMatrix| -> Dense {
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..d {
            for j in 0..d {
                out[i][j] = m.get(i, j);
            }
        }
        out
    };
    let ibar = embed_top(&SymMatrix::identity(d));
    let h = |s: usize, t: usize| -> Dense {
        let mut out = vec![vec![0.0; n]; n];
        for off in [0, d] {
            out[off + s][off + t] = 1.0;
            out[off + t][off + s] = 1.0;
        }
        out
    };
    let sbars: Vec<Dense> = problem.diffs().iter().map(embed_top).collect();
    let mut pairs = Vec::new();
    for t in 0..d {
        for s in t..d {
            pairs.push((s, t));
        }
    }
    let hs: Vec<Dense> = pairs.iter().map(|&(s, t)| h(s, t)).collect();

    let mut abar = vec![vec![0.0; n]; n];
    let mut add = |m: &Dense, w: f64| {
        for i in 0..n {
            for j in 0..n {
                abar[i][j] += w * m[i][j];
            }
        }
    };
    for (m, &u) in sbars.iter().zip(&point.u) {
        add(m, u);
    }
    add(&ibar, point.v);
    for (m, &p) in hs.iter().zip(&point.p) {
        add(m, p);
    }
    let plus = dense_psd_part(&abar);
    let r = problem.rank() as f64;
    let p_diag: f64 = pairs.iter().zip(&point.p).filter(|((s, t), _)| s == t).map(|(_, p)| p).sum();
    let f = 0.5 * dense_inner(&plus, &plus) - point.v * r - p_diag;
    let mut grad = Vec::new();
    for m in &sbars {
        grad.push(dense_inner(&plus, m));
    }
    grad.push(dense_inner(&plus, &ibar) - r);
    for (&(s, t), m) in pairs.iter().zip(&hs) {
        grad.push(dense_inner(&plus, m) - if s == t { 1.0 } else { 0.0 });
    }
    (f, grad)
}

/// Gaussian clouds with random means and anisotropic covariances.
pub fn random_dataset(rng: &mut ChaCha8Rng, d: usize, c: usize, per_class: usize) -> Dataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for k in 0..c {
        let mean: Vec<f64> = (0..d).map(|_| 2.0 * normal(rng)).collect();
        let mix: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..d).map(|_| rng.random_range(-0.6..0.6)).collect())
            .collect();
        let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..1.5)).collect();
        for _ in 0..per_class {
            let z: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
            let x: Vec<f64> = (0..d)
                .map(|i| mean[i] + scale[i] * z[i] + (0..d).map(|j| mix[i][j] * z[j]).sum::<f64>() * 0.5)
                .collect();
            rows.push(x);
            labels.push(k);
        }
    }
    Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, c).unwrap()
}

pub fn random_problem(rng: &mut ChaCha8Rng, d: usize, c: usize) -> (ScatterSet, FeasibilityProblem) {
    let data = random_dataset(rng, d, c, 12);
    let scatters = compute_scatters(&data);
    let r = rng.random_range(1..=d);
    let delta = rng.random_range(0.0..3.0);
    let problem = FeasibilityProblem::new(&scatters, r, delta, FeasibilityOptions::default()).unwrap();
    (scatters, problem)
}

pub fn random_point(rng: &mut ChaCha8Rng, problem: &FeasibilityProblem) -> DualPoint {
    DualPoint {
        u: (0..problem.num_u()).map(|_| rng.random_range(0.0..1.0)).collect(),
        v: normal(rng),
        p: (0..problem.num_p()).map(|_| normal(rng)).collect(),
    }
}

pub struct PrimalReport {
    pub trace_err: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub worst_slack: f64,
    pub slack_scale: f64,
    pub identity_residual: f64,
}

impl PrimalReport {
    pub fn holds(&self, r: usize, d: usize, eta: f64) -> bool {
        self.trace_err <= eta * r as f64
            && self.eig_min >= -eta
            && self.eig_max <= 1.0 + eta
            && self.worst_slack >= -eta * self.slack_scale
            && self.identity_residual <= eta * (d as f64).sqrt()
    }
}

/// The primal contract recomputed from raw scatters with dense arithmetic.
pub fn primal_report(scatters: &ScatterSet, r: usize, delta: f64, z: &SymMatrix, q: &SymMatrix) -> PrimalReport {
    let zd = to_dense(z);
    let qd = to_dense(q);
    let d = zd.len();
    let trace: f64 = (0..d).map(|i| zd[i][i]).sum();
    let (vals, _) = jacobi_eig(&zd);
    let within: Vec<f64> = scatters.within.iter().map(|s| dense_inner(&to_dense(s), &zd)).collect();
    let max_within = within.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut worst = f64::INFINITY;
    for b in &scatters.between {
        let tb = dense_inner(&to_dense(b), &zd);
        for tw in &within {
            worst = worst.min(tb - delta * tw);
        }
    }
    let mut resid = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            resid += (zd[i][j] + qd[i][j] - target).powi(2);
        }
    }
    PrimalReport {
        trace_err: (trace - r as f64).abs(),
        eig_min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
        eig_max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        worst_slack: worst,
        slack_scale: (delta * max_within).max(1.0),
        identity_residual: resid.sqrt(),
    }
}

/// `min_ij tr(S_ij Z) / max_k tr(S_k Z)` with dense arithmetic.
pub fn dense_ratio(scatters: &ScatterSet, z: &SymMatrix) -> f64 {
    let zd = to_dense(z);
    let b = scatters.between.iter().map(|s| dense_inner(&to_dense(s), &zd)).fold(f64::INFINITY, f64::min);
    let w = scatters.within.iter().map(|s| dense_inner(&to_dense(s), &zd)).fold(f64::NEG_INFINITY, f64::max);
    b / w
}

/// Largest principal-angle sine between the column spans of two orthonormal bases.
pub fn subspace_distance(a: &Matrix, b: &Matrix) -> f64 {
    let d = a.rows();
    let proj = |m: &Matrix| -> Dense {
        (0..d)
            .map(|i| (0..d).map(|j| (0..m.cols()).map(|k| m.get(i, k) * m.get(j, k)).sum()).collect())
            .collect()
    };
    let pa = proj(a);
    let pb = proj(b);
    let diff: Dense = (0..d).map(|i| (0..d).map(|j| pa[i][j] - pb[i][j]).collect()).collect();
    let (vals, _) = jacobi_eig(&diff);
    vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
