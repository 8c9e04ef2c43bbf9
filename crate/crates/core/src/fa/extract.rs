use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{scores, sym_eigen, varimax, CorrelationMatrix, FaOptions, Method, Rotation};
use crate::error::{Error, Result};

/// Result of a factor extraction.
///
/// Factors are orthogonal (factor correlation fixed to identity), so the
/// model is `sigma = lambda lambda' + diag(gamma2) + residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub method: Method,
    /// P x I loadings after rotation (equal to `unrotated` without rotation).
    pub lambda: DMatrix<f64>,
    pub unrotated: DMatrix<f64>,
    /// Uniquenesses.
    pub gamma2: DVector<f64>,
    /// Eigenvalues of the final reduced matrix (of `sigma` itself for PCA),
    /// descending.
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// The matrix whose eigenpairs are stored above.
    pub reduced: DMatrix<f64>,
    pub retained: usize,
    pub residual: DMatrix<f64>,
    pub rotation: Rotation,
    /// I x I orthogonal matrix with `lambda = unrotated * rotation_matrix`.
    pub rotation_matrix: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Uniqueness clamps applied on the final iteration.
    pub heywood: usize,
    /// Loadings of a single-factor extraction over the same matrix.
    pub g_loadings: DVector<f64>,
    pub scores: Option<DMatrix<f64>>,
    pub g_score: Option<DVector<f64>>,
}

impl FactorModel {
    pub fn communalities(&self) -> DVector<f64> {
        DVector::from_iterator(self.lambda.nrows(), self.lambda.row_iter().map(|r| r.norm_squared()))
    }

    /// Root mean square of the off-diagonal residuals.
    pub fn rmsr(&self) -> f64 {
        off_diagonal_rms(&self.residual)
    }

    /// Computes factor scores and the single-factor score for standardized
    /// observations `z` (N x P).
    pub fn attach_scores(&mut self, z: &DMatrix<f64>, sigma: &CorrelationMatrix) -> Result<()> {
        self.scores = Some(scores(z, sigma, &self.lambda)?);
        let g = DMatrix::from_column_slice(self.g_loadings.len(), 1, self.g_loadings.as_slice());
        self.g_score = Some(scores(z, sigma, &g)?.column(0).into_owned());
        Ok(())
    }
}

pub(crate) fn off_diagonal_rms(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    if p < 2 {
        return 0.0;
    }
    let mut ss = 0.0;
    for i in 0..p {
        for j in 0..i {
            ss += m[(i, j)].powi(2);
        }
    }
    (ss / (p * (p - 1) / 2) as f64).sqrt()
}

fn check_psd(sigma: &DMatrix<f64>) -> Result<()> {
    let (vals, _) = sym_eigen(sigma);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-6 {
        return Err(Error::Input(format!("correlation matrix is not positive semidefinite (eigenvalue {min:e})")));
    }
    Ok(())
}

/// Diagonal of the inverse, adding a growing ridge until Cholesky succeeds.
fn inverse_diagonal(sigma: &DMatrix<f64>) -> DVector<f64> {
    let p = sigma.nrows();
    let mut ridge = 0.0;
    loop {
        let m = sigma + DMatrix::identity(p, p) * ridge;
        if let Some(ch) = m.cholesky() {
            return ch.inverse().diagonal();
        }
        ridge = if ridge == 0.0 { 1e-10 } else { ridge * 10.0 };
    }
}

/// Loadings `A_k D_k^{1/2}` from the leading `k` eigenpairs; negative
/// eigenvalues count as zero.
fn loadings(values: &DVector<f64>, vectors: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut l = vectors.columns(0, k).into_owned();
    for j in 0..k {
        l.column_mut(j).scale_mut(values[j].max(0.0).sqrt());
    }
    l
}

fn retained_count(values: &DVector<f64>, opts: &FaOptions) -> usize {
    match opts.n_factors {
        Some(k) => k.min(values.len()),
        None => values.iter().filter(|&&v| v > opts.retention).count(),
    }
}

struct PrincipalAxis {
    lambda: DMatrix<f64>,
    gamma2: DVector<f64>,
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    reduced: DMatrix<f64>,
    converged: bool,
    iterations: usize,
    heywood: usize,
}

/// Alternates eigendecomposition of `sigma - diag(gamma2)` with
/// `gamma2 = diag(sigma - lambda lambda')`, starting from `1 - SMC`.
fn principal_axis(sigma: &DMatrix<f64>, opts: &FaOptions) -> PrincipalAxis {
    let p = sigma.nrows();
    let lo = opts.gamma2_min;
    let mut gamma2 = inverse_diagonal(sigma).map(|d| (1.0 / d).clamp(lo, 1.0));
    let mut state = None;
    for iter in 1..=opts.max_iter.max(1) {
        let mut reduced = sigma.clone();
        for i in 0..p {
            reduced[(i, i)] -= gamma2[i];
        }
        let (values, vectors) = sym_eigen(&reduced);
        let k = retained_count(&values, opts);
        let lambda = loadings(&values, &vectors, k);
        let mut heywood = 0;
        let next = DVector::from_iterator(
            p,
            (0..p).map(|i| {
                let g = sigma[(i, i)] - lambda.row(i).norm_squared();
                if !(lo..=1.0).contains(&g) {
                    heywood += 1;
                }
                g.clamp(lo, 1.0)
            }),
        );
        let delta = (&next - &gamma2).amax();
        gamma2 = next;
        let converged = delta < opts.tol;
        state = Some(PrincipalAxis { lambda, gamma2: gamma2.clone(), values, vectors, reduced, converged, iterations: iter, heywood });
        if converged {
            break;
        }
    }
    let out = state.expect("at least one iteration");
    if out.heywood > 0 {
        log::warn!("{} uniqueness estimate(s) clamped to [{lo}, 1]", out.heywood);
    }
    if !out.converged {
        log::warn!("principal-axis iteration did not converge in {} iterations", out.iterations);
    }
    out
}

fn residual(sigma: &DMatrix<f64>, lambda: &DMatrix<f64>, gamma2: &DVector<f64>) -> DMatrix<f64> {
    let mut r = sigma - lambda * lambda.transpose();
    for i in 0..r.nrows() {
        r[(i, i)] -= gamma2[i];
    }
    r
}

fn finish(
    method: Method,
    sigma: &DMatrix<f64>,
    unrotated: DMatrix<f64>,
    gamma2: DVector<f64>,
    g_loadings: DVector<f64>,
    opts: &FaOptions,
    extra: (DVector<f64>, DMatrix<f64>, DMatrix<f64>, bool, usize, usize),
) -> FactorModel {
    let (eigenvalues, eigenvectors, reduced, converged, iterations, heywood) = extra;
    let retained = unrotated.ncols();
    let (lambda, rotation_matrix) = match opts.rotation {
        Rotation::Varimax if retained >= 2 => {
            let v = varimax(&unrotated);
            (v.loadings, v.rotation)
        }
        _ => {
            let mut l = unrotated.clone();
            let flips = super::fix_column_signs(&mut l);
            let mut r = DMatrix::identity(retained, retained);
            for (j, f) in flips.into_iter().enumerate() {
                if f {
                    r[(j, j)] = -1.0;
                }
            }
            (l, r)
        }
    };
    let residual = residual(sigma, &unrotated, &gamma2);
    FactorModel {
        method,
        lambda,
        unrotated,
        gamma2,
        eigenvalues,
        eigenvectors,
        reduced,
        retained,
        residual,
        rotation: opts.rotation,
        rotation_matrix,
        converged,
        iterations,
        heywood,
        g_loadings,
        scores: None,
        g_score: None,
    }
}

/// Single-factor loadings, signed so that their sum is non-negative.
fn general_factor(sigma: &DMatrix<f64>, opts: &FaOptions) -> DVector<f64> {
    let single = FaOptions { n_factors: Some(1), ..*opts };
    let pa = principal_axis(sigma, &single);
    let mut g = if pa.lambda.ncols() == 1 { pa.lambda.column(0).into_owned() } else { DVector::zeros(sigma.nrows()) };
    if g.sum() < 0.0 {
        g.neg_mut();
    }
    g
}

/// Iterative principal-axis factor extraction.
pub fn extract(sigma: &CorrelationMatrix, opts: &FaOptions) -> Result<FactorModel> {
    let s = &sigma.sigma;
    check_psd(s)?;
    let pa = principal_axis(s, opts);
    let g = general_factor(s, opts);
    Ok(finish(
        Method::Fa,
        s,
        pa.lambda,
        pa.gamma2,
        g,
        opts,
        (pa.values, pa.vectors, pa.reduced, pa.converged, pa.iterations, pa.heywood),
    ))
}

/// Principal components of `sigma` itself, scaled as loadings.
pub fn pca(sigma: &CorrelationMatrix, opts: &FaOptions) -> Result<FactorModel> {
    let s = &sigma.sigma;
    check_psd(s)?;
    let (values, vectors) = sym_eigen(s);
    let k = retained_count(&values, opts);
    let lambda = loadings(&values, &vectors, k);
    let gamma2 = DVector::from_iterator(s.nrows(), (0..s.nrows()).map(|i| (s[(i, i)] - lambda.row(i).norm_squared()).max(0.0)));
    let mut g = loadings(&values, &vectors, 1.min(values.len())).column(0).into_owned();
    if g.sum() < 0.0 {
        g.neg_mut();
    }
    Ok(finish(Method::Pca, s, lambda, gamma2, g, opts, (values, vectors, s.clone(), true, 0, 0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub hypothesized: usize,
    /// Root mean square off-diagonal residual.
    pub rmsr: f64,
    /// Share of total variance in the leading `hypothesized` eigenvalues of
    /// the correlation matrix.
    pub explained_initial: f64,
    /// Mean communality of the fitted factors.
    pub explained_common: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Fits exactly `hypothesized` factors and reports how well they reproduce
/// the correlations.
pub fn confirmatory_fit(sigma: &CorrelationMatrix, hypothesized: usize) -> Result<FitReport> {
    let p = sigma.dim();
    if hypothesized == 0 || hypothesized >= p {
        return Err(Error::Contract(format!("hypothesized factor count {hypothesized} must lie in [1, {p})")));
    }
    let opts = FaOptions { n_factors: Some(hypothesized), ..FaOptions::default() };
    let model = extract(sigma, &opts)?;
    let (values, _) = sym_eigen(&sigma.sigma);
    Ok(FitReport {
        hypothesized,
        rmsr: model.rmsr(),
        explained_initial: values.iter().take(hypothesized).sum::<f64>() / p as f64,
        explained_common: model.communalities().sum() / p as f64,
        converged: model.converged,
        iterations: model.iterations,
    })
}
