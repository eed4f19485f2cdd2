//! Exhaustive reference for two-dimensional, rank-one problems.
//!
//! Every `Z` with `trace Z = 1`, `0 <= Z <= I` in two dimensions has the form
//! `Q(theta) diag(lambda, 1 - lambda) Q(theta)^T`, so a grid over
//! `(theta, lambda)` covers the relaxed feasible set. The grid uses its own
//! 2x2 arithmetic and shares nothing with the dual solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::scatter::{compute_scatters, Dataset, ScatterSet};
use crate::symmat::Matrix;
use crate::wlda::{fit_scatters, FitError, WldaConfig};

pub const GRID_ANGLES: usize = 720;
pub const GRID_WEIGHTS: usize = 501;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    /// Best ratio on the grid; `+inf` if some grid point has `rho_w <= 0 < rho_b`.
    pub delta: f64,
    pub theta: f64,
    pub lambda: f64,
}

type Sym2 = [f64; 3];

fn sym2(s: &ScatterSet, m: &crate::symmat::SymMatrix) -> Sym2 {
    debug_assert_eq!(s.dim(), 2);
    [m.get(0, 0), m.get(1, 0), m.get(1, 1)]
}

fn quad(m: &Sym2, x: f64, y: f64) -> f64 {
    m[0] * x * x + 2.0 * m[1] * x * y + m[2] * y * y
}

/// Maximizes `min_ij tr(S_ij Z) / max_k tr(S_k Z)` over the `(theta, lambda)` grid.
pub fn grid_oracle_2d(scatters: &ScatterSet) -> GridOptimum {
    assert_eq!(scatters.dim(), 2, "grid oracle is two-dimensional");
    let between: Vec<Sym2> = scatters.between.iter().map(|m| sym2(scatters, m)).collect();
    let within: Vec<Sym2> = scatters.within.iter().map(|m| sym2(scatters, m)).collect();
    let mut best = GridOptimum {
        delta: f64::NEG_INFINITY,
        theta: 0.0,
        lambda: 0.0,
    };
    let mut a_b = vec![0.0; between.len()];
    let mut b_b = vec![0.0; between.len()];
    let mut a_w = vec![0.0; within.len()];
    let mut b_w = vec![0.0; within.len()];
    for t in 0..GRID_ANGLES {
        let theta = std::f64::consts::PI * t as f64 / GRID_ANGLES as f64;
        let (s, c) = theta.sin_cos();
        for (k, m) in between.iter().enumerate() {
            a_b[k] = quad(m, c, s);
            b_b[k] = quad(m, -s, c);
        }
        for (k, m) in within.iter().enumerate() {
            a_w[k] = quad(m, c, s);
            b_w[k] = quad(m, -s, c);
        }
        for l in 0..GRID_WEIGHTS {
            let lambda = l as f64 / (GRID_WEIGHTS - 1) as f64;
            let rho_b = a_b
                .iter()
                .zip(&b_b)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .fold(f64::INFINITY, f64::min);
            let rho_w = a_w
                .iter()
                .zip(&b_w)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .fold(f64::NEG_INFINITY, f64::max);
            let ratio = if rho_w > 0.0 {
                rho_b / rho_w
            } else if rho_b > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if ratio > best.delta {
                best = GridOptimum { delta: ratio, theta, lambda };
            }
        }
    }
    best
}

/// Seeded Gaussian class clouds in two dimensions with 2 or 3 classes.
pub fn random_instance(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = rng.random_range(2..=3usize);
    let per_class = 20;
    let mut rows = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for k in 0..classes {
        let mean = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let l00: f64 = rng.random_range(0.3..1.5);
        let l11: f64 = rng.random_range(0.3..1.5);
        let l10: f64 = rng.random_range(-0.5..0.5);
        for _ in 0..per_class {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            rows.push(vec![mean[0] + l00 * z0, mean[1] + l10 * z0 + l11 * z1]);
            labels.push(k);
        }
    }
    Dataset::new(Matrix::from_rows(&rows).expect("rectangular"), labels, classes).expect("valid instance")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub seed: u64,
    pub classes: usize,
    pub grid_delta: f64,
    pub solver_delta: f64,
    pub deviation: f64,
    pub tolerance: f64,
}

impl OracleComparison {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

/// Fits `instances` random problems (seeds `seed..seed+instances`) with `r = 1`
/// and compares each `delta*` with the grid optimum.
pub fn compare_dim2(instances: usize, seed: u64, config: &WldaConfig) -> Result<Vec<OracleComparison>, FitError> {
    let mut config = config.clone();
    config.r = 1;
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let data = random_instance(s);
            let scatters = compute_scatters(&data);
            let grid = grid_oracle_2d(&scatters);
            let model = fit_scatters(&scatters, &config)?;
            let tolerance = (2.0 * config.sigma * grid.delta).max(1e-2);
            let deviation = if grid.delta.is_infinite() && model.delta_star.is_infinite() {
                0.0
            } else {
                (model.delta_star - grid.delta).abs()
            };
            Ok(OracleComparison {
                seed: s,
                classes: data.num_classes(),
                grid_delta: grid.delta,
                solver_delta: model.delta_star,
                deviation,
                tolerance,
            })
        })
        .collect()
}
