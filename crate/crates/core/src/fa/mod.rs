//! Factor extraction from a performance matrix.
//!
//! The pipeline is: Pearson [`correlation`] of the columns, iterative
//! principal-axis [`extract`]ion (or [`pca`]), optional [`varimax`]
//! rotation and regression [`scores`].

mod correlation;
mod extract;
mod scores;
mod varimax;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use correlation::{correlation, ColumnStats, CorrelationMatrix};
pub use extract::{confirmatory_fit, extract, pca, FactorModel, FitReport};
pub use scores::scores;
pub use varimax::{varimax, varimax_criterion, Varimax};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fa,
    Pca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    None,
    Varimax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaOptions {
    /// Factors whose eigenvalue is strictly above this are retained.
    pub retention: f64,
    /// Fixes the number of factors instead of applying `retention`.
    pub n_factors: Option<usize>,
    pub max_iter: usize,
    /// Convergence threshold on the largest uniqueness change.
    pub tol: f64,
    /// Lower clamp on uniquenesses.
    pub gamma2_min: f64,
    pub rotation: Rotation,
}

impl Default for FaOptions {
    fn default() -> Self {
        FaOptions { retention: 1.0, n_factors: None, max_iter: 1000, tol: 1e-6, gamma2_min: 1e-4, rotation: Rotation::None }
    }
}

/// Everything derived from one performance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub sigma: CorrelationMatrix,
    /// Eigenvalues of the correlation matrix itself, descending.
    pub initial_eigenvalues: DVector<f64>,
    /// Fitted model with scores attached.
    pub model: FactorModel,
}

/// Correlation, extraction by `method` and scores for the rows of a
/// performance matrix.
pub fn analyze(rows: &[Vec<f64>], method: Method, opts: &FaOptions) -> Result<Analysis> {
    let sigma = correlation(rows)?;
    let mut model = match method {
        Method::Fa => extract(&sigma, opts)?,
        Method::Pca => pca(&sigma, opts)?,
    };
    let z = sigma.standardize(rows)?;
    model.attach_scores(&z, &sigma)?;
    let (initial_eigenvalues, _) = sym_eigen(&sigma.sigma);
    Ok(Analysis { sigma, initial_eigenvalues, model })
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending. Each
/// eigenvector is signed so its largest-magnitude entry is positive.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        if col[col.iamax()] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Flips columns so each column's largest-magnitude entry is positive.
pub(crate) fn fix_column_signs(m: &mut DMatrix<f64>) -> Vec<bool> {
    (0..m.ncols())
        .map(|j| {
            let flip = {
                let col = m.column(j);
                !col.is_empty() && col[col.iamax()] < 0.0
            };
            if flip {
                m.column_mut(j).neg_mut();
            }
            flip
        })
        .collect()
}
