use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
}

/// Pearson correlations of the non-constant columns of a data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub sigma: DMatrix<f64>,
    /// Original indices of the columns kept in `sigma`.
    pub kept: Vec<usize>,
    /// Original indices of constant columns that were dropped.
    pub dropped: Vec<usize>,
    /// Mean and sample standard deviation of each kept column.
    pub stats: Vec<ColumnStats>,
}

impl CorrelationMatrix {
    /// Wraps an externally supplied correlation matrix after checking
    /// symmetry, unit diagonal and range.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        let p = sigma.nrows();
        if p == 0 || sigma.ncols() != p {
            return Err(Error::Input("correlation matrix must be square and non-empty".into()));
        }
        for i in 0..p {
            if (sigma[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::Input(format!("diagonal entry {i} is {} not 1", sigma[(i, i)])));
            }
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-9 || sigma[(i, j)].abs() > 1.0 + 1e-9 {
                    return Err(Error::Input(format!("entry ({i}, {j}) breaks symmetry or range")));
                }
            }
        }
        let sigma = symmetrize(sigma);
        Ok(CorrelationMatrix {
            kept: (0..p).collect(),
            dropped: Vec::new(),
            stats: vec![ColumnStats { mean: 0.0, sd: 1.0 }; p],
            sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// z-scores of the kept columns of `rows` using the stored statistics.
    pub fn standardize(&self, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let n = rows.len();
        let mut z = DMatrix::zeros(n, self.kept.len());
        for (i, row) in rows.iter().enumerate() {
            for (k, (&col, st)) in self.kept.iter().zip(&self.stats).enumerate() {
                let v = *row
                    .get(col)
                    .ok_or_else(|| Error::Contract(format!("row {i} has no column {col}")))?;
                z[(i, k)] = (v - st.mean) / st.sd;
            }
        }
        Ok(z)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let mut s = (&m + m.transpose()) * 0.5;
    for i in 0..s.nrows() {
        s[(i, i)] = 1.0;
    }
    s.apply(|x| *x = x.clamp(-1.0, 1.0));
    s
}

/// Column correlations of a row-major data matrix. Constant columns are
/// dropped with a warning and listed in `dropped`.
pub fn correlation(rows: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} observations; need at least 2")));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Contract("ragged data matrix".into()));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut stats = Vec::new();
    for j in 0..p {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("dropping constant column {j}");
            dropped.push(j);
        } else {
            kept.push(j);
            stats.push(ColumnStats { mean, sd });
        }
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData("every column is constant".into()));
    }
    let mut z = DMatrix::zeros(n, kept.len());
    for (i, row) in rows.iter().enumerate() {
        for (k, (&col, st)) in kept.iter().zip(&stats).enumerate() {
            z[(i, k)] = (row[col] - st.mean) / st.sd;
        }
    }
    let sigma = symmetrize(z.transpose() * &z / (n - 1) as f64);
    Ok(CorrelationMatrix { sigma, kept, dropped, stats })
}
