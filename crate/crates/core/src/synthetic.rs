//! Synthetic factor models with known structure, for recovery checks and
//! benchmarks.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::Stream;

/// P x I simple-structure loadings: variable `p` loads on factor
/// `p mod I` with magnitude in `[0.6, 0.85]`, plus cross-loadings in
/// `[-0.1, 0.1]`.
pub fn simple_structure(p: usize, factors: usize, rng: &mut Stream) -> DMatrix<f64> {
    DMatrix::from_fn(p, factors, |i, j| {
        let u = rng.uniform();
        if i % factors == j {
            0.6 + 0.25 * u
        } else {
            0.2 * u - 0.1
        }
    })
}

/// Correlation matrix implied by `loadings` with uniquenesses filling the
/// diagonal to 1.
pub fn implied_correlation(loadings: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = loadings * loadings.transpose();
    for i in 0..s.nrows() {
        s[(i, i)] = 1.0;
    }
    s
}

/// `n` rows of `loadings x + e` with standard normal factors and unique
/// noise of variance `1 - communality`.
pub fn sample_rows(loadings: &DMatrix<f64>, n: usize, rng: &mut Stream) -> Vec<Vec<f64>> {
    let (p, k) = loadings.shape();
    let unique: Vec<f64> = (0..p).map(|i| (1.0 - loadings.row(i).norm_squared()).max(0.0).sqrt()).collect();
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng.rng())).collect();
            (0..p)
                .map(|i| {
                    let e: f64 = StandardNormal.sample(rng.rng());
                    (0..k).map(|j| loadings[(i, j)] * x[j]).sum::<f64>() + unique[i] * e
                })
                .collect()
        })
        .collect()
}

/// Smallest per-column absolute congruence between `a` and `b` under the best
/// column permutation of `b`.
pub fn aligned_congruence(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }
    if a.shape() != b.shape() {
        return 0.0;
    }
    perms(a.ncols())
        .iter()
        .map(|perm| {
            perm.iter()
                .enumerate()
                .map(|(j, &pj)| {
                    let (x, y) = (a.column(j), b.column(pj));
                    (x.dot(&y) / (x.norm() * y.norm())).abs()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
